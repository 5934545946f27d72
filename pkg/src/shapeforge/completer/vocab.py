"""Token vocabulary and (de)tokenization for rule sequences.

Layout: PAD, BOS, EOS, one condition token per shape type, one token per
grammar rule (declaration order), then B=16 parameter bucket tokens. A
design tokenizes as BOS, COND, then per application the rule token followed
by one bucket token per rule param, and a closing EOS. Bucketing quantizes
a normalized param into floor(norm * B) clamped to B-1; decoding uses the
bucket midpoint, so tokenize(detokenize(tokens)) is the identity and
detokenize(tokenize(s)) reproduces s up to param quantization.

Host attachments are not tokenized; detokenization replays the sequence and
assigns each application the least-loaded admissible host, which matches
how the walk corpus chooses hosts.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..grammar.engine import initial_state, legal_rules, least_loaded_host, step
from ..grammar.model import (
    DesignSequence,
    Grammar,
    GrammarViolation,
    RuleApplication,
    Violation,
)

PARAM_BUCKETS = 16

PAD, BOS, EOS = 0, 1, 2
_SPECIALS = ("<pad>", "<bos>", "<eos>")


class TokenizeError(ValueError):
    pass


@dataclass(frozen=True)
class TokenVocab:
    shape_types: tuple[str, ...]
    rule_ids: tuple[str, ...]
    buckets: int = PARAM_BUCKETS

    @property
    def size(self) -> int:
        return 3 + len(self.shape_types) + len(self.rule_ids) + self.buckets

    @property
    def cond_base(self) -> int:
        return 3

    @property
    def rule_base(self) -> int:
        return 3 + len(self.shape_types)

    @property
    def param_base(self) -> int:
        return self.rule_base + len(self.rule_ids)

    @staticmethod
    def for_grammar(g: Grammar) -> "TokenVocab":
        return TokenVocab(shape_types=g.shape_types, rule_ids=tuple(r.id for r in g.rules))

    def cond_token(self, shape_type: str) -> int:
        return self.cond_base + self.shape_types.index(shape_type)

    def rule_token(self, rule_id: str) -> int:
        return self.rule_base + self.rule_ids.index(rule_id)

    def param_token(self, bucket: int) -> int:
        return self.param_base + bucket

    def is_rule(self, token: int) -> bool:
        return self.rule_base <= token < self.param_base

    def is_param(self, token: int) -> bool:
        return self.param_base <= token < self.size

    def is_cond(self, token: int) -> bool:
        return self.cond_base <= token < self.rule_base

    def rule_id_of(self, token: int) -> str:
        return self.rule_ids[token - self.rule_base]

    def bucket_of(self, token: int) -> int:
        return token - self.param_base

    def shape_type_of(self, token: int) -> str:
        return self.shape_types[token - self.cond_base]

    def describe(self, token: int) -> str:
        if token < 3:
            return _SPECIALS[token]
        if self.is_cond(token):
            return f"cond:{self.shape_type_of(token)}"
        if self.is_rule(token):
            return f"rule:{self.rule_id_of(token)}"
        return f"P{self.bucket_of(token)}"

    def to_dict(self) -> dict:
        return {
            "shapeTypes": list(self.shape_types),
            "ruleIds": list(self.rule_ids),
            "buckets": self.buckets,
        }

    @staticmethod
    def from_dict(d: dict) -> "TokenVocab":
        return TokenVocab(
            shape_types=tuple(d["shapeTypes"]),
            rule_ids=tuple(d["ruleIds"]),
            buckets=int(d["buckets"]),
        )


def param_bucket(spec, value: float, buckets: int = PARAM_BUCKETS) -> int:
    if spec.span == 0:
        return 0
    norm = (value - spec.min) / spec.span
    return min(max(int(norm * buckets), 0), buckets - 1)


def bucket_value(spec, bucket: int, buckets: int = PARAM_BUCKETS) -> float:
    value = spec.min + ((bucket + 0.5) / buckets) * spec.span
    if spec.kind == "integer":
        value = float(round(value))
    return min(max(value, spec.min), spec.max)


def application_tokens(g: Grammar, vocab: TokenVocab, app: RuleApplication) -> list[int]:
    rule = g.rule(app.rule_id)
    toks = [vocab.rule_token(app.rule_id)]
    for spec, value in zip(rule.params, app.param_values):
        toks.append(vocab.param_token(param_bucket(spec, value, vocab.buckets)))
    return toks


def tokenize(
    g: Grammar, vocab: TokenVocab, s: DesignSequence, max_len: int | None = None
) -> list[int]:
    toks = [BOS, vocab.cond_token(s.shape_type)]
    for app in s.applications:
        toks.extend(application_tokens(g, vocab, app))
    toks.append(EOS)
    if max_len is not None and len(toks) > max_len:
        raise TokenizeError(f"{len(toks)} tokens exceed the model window {max_len}")
    return toks


def detokenize(g: Grammar, vocab: TokenVocab, tokens: list[int]) -> DesignSequence:
    """Rebuild a sequence, assigning least-loaded admissible hosts."""
    toks = list(tokens)
    if not toks or toks[0] != BOS:
        raise TokenizeError("token stream must start with <bos>")
    if len(toks) < 2 or not vocab.is_cond(toks[1]):
        raise TokenizeError("expected a condition token after <bos>")
    shape_type = vocab.shape_type_of(toks[1])
    state = initial_state(g, shape_type)
    i = 2
    while i < len(toks) and toks[i] != EOS:
        tok = toks[i]
        if not vocab.is_rule(tok):
            raise TokenizeError(f"expected a rule token at position {i}, got {vocab.describe(tok)}")
        rule = g.rule(vocab.rule_id_of(tok))
        i += 1
        values = []
        for spec in rule.params:
            if i >= len(toks) or not vocab.is_param(toks[i]):
                raise TokenizeError(f"rule {rule.id!r} expects {rule.arity} param tokens")
            values.append(bucket_value(spec, vocab.bucket_of(toks[i]), vocab.buckets))
            i += 1
        legal = legal_rules(g, state)
        if rule.id not in legal:
            raise GrammarViolation(
                Violation(
                    "illegal-rule",
                    "legality",
                    f"rule {rule.id!r} is not legal at this prefix",
                )
            )
        host = least_loaded_host(state, legal[rule.id])
        state = step(state, RuleApplication(rule.id, host, tuple(values)))
    return DesignSequence(shape_type=shape_type, applications=state.applications)
