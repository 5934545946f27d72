"""Grammar-constrained completion of partial designs.

Beam search with hard masking: at group boundaries only rule tokens that
are legal at the current prefix survive, and EOS only where the assembled
solution passes the full constraint check; inside a group only parameter
bucket tokens are allowed. Assembled groups are applied immediately, and a
group whose decoded parameters violate a constraint (or introduce a
permanent collision) kills its hypothesis. Every returned completion
therefore extends the prefix into a valid complete design, trained model or
not. Hypotheses are ranked by length-normalized log-likelihood with
deterministic tie-breaks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..grammar.engine import (
    ReplayState,
    check_state,
    initial_state,
    legal_rules,
    least_loaded_host,
    step,
)
from ..grammar.geometry import find_collisions
from ..grammar.model import (
    DesignSequence,
    Grammar,
    GrammarViolation,
    NoCollision,
    RuleApplication,
)
from .model import CompleterModel
from .vocab import EOS, TokenizeError, bucket_value, tokenize


@dataclass(frozen=True)
class Completion:
    """One recommended suffix: applications to append to the prefix."""

    suffix: tuple[RuleApplication, ...]
    score: float  # length-normalized log-likelihood
    log_likelihood: float
    tokens: tuple[int, ...]  # generated tokens including EOS

    def to_dict(self) -> dict:
        return {
            "suffix": [a.to_dict() for a in self.suffix],
            "score": self.score,
            "logLikelihood": self.log_likelihood,
        }


@dataclass
class _Hypothesis:
    tokens: list[int]
    state: ReplayState
    log_prob: float
    generated: int
    partial_rule: Optional[str] = None
    partial_host: Optional[int] = None
    partial_values: list[float] = field(default_factory=list)

    def sort_key(self):
        return (-self.log_prob, tuple(self.tokens))


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    return z - np.log(np.exp(z).sum())


def _collision_active(state: ReplayState) -> bool:
    return any(
        isinstance(c, NoCollision)
        for c in state.grammar.constraints_for(state.shape_type)
    )


def _viable_rules(g: Grammar, state: ReplayState, legal: dict[str, list[int]]) -> list[str]:
    """Legal rules that survive a midpoint-parameter placement probe.

    Entering a rule group commits the beam for the whole parameter run, so
    rules whose least-loaded placement already collides (a doomed group for
    any parameters in this geometry) are masked out up front.
    """
    if not _collision_active(state):
        return list(legal)
    out = []
    for rid, hosts in legal.items():
        rule = g.rule(rid)
        host = least_loaded_host(state, hosts)
        probe = RuleApplication(rid, host, tuple(p.midpoint() for p in rule.params))
        try:
            nxt = step(state, probe)
        except GrammarViolation:
            out.append(rid)  # parameter-specific; let the beam decide
            continue
        if not find_collisions(list(nxt.occurrences)):
            out.append(rid)
    return out


def _advance(hyp: _Hypothesis, token: int, log_p: float, model: CompleterModel, g: Grammar):
    """Apply one generated token; returns the new hypothesis or None."""
    vocab = model.vocab
    nxt = _Hypothesis(
        tokens=hyp.tokens + [token],
        state=hyp.state,
        log_prob=hyp.log_prob + log_p,
        generated=hyp.generated + 1,
        partial_rule=hyp.partial_rule,
        partial_host=hyp.partial_host,
        partial_values=list(hyp.partial_values),
    )
    if vocab.is_param(token):
        rule = g.rule(nxt.partial_rule)
        spec = rule.params[len(nxt.partial_values)]
        nxt.partial_values.append(bucket_value(spec, vocab.bucket_of(token), vocab.buckets))
    elif vocab.is_rule(token):
        legal = legal_rules(g, nxt.state)
        rid = vocab.rule_id_of(token)
        nxt.partial_rule = rid
        nxt.partial_host = least_loaded_host(nxt.state, legal[rid])
    else:
        return nxt  # EOS handled by caller

    rule = g.rule(nxt.partial_rule)
    if len(nxt.partial_values) == rule.arity:
        app = RuleApplication(nxt.partial_rule, nxt.partial_host, tuple(nxt.partial_values))
        try:
            new_state = step(nxt.state, app)
        except GrammarViolation:
            return None
        if _collision_active(new_state) and find_collisions(list(new_state.occurrences)):
            return None  # additive grammar: a colliding prefix can never recover
        nxt.state = new_state
        nxt.partial_rule = None
        nxt.partial_host = None
        nxt.partial_values = []
    return nxt


def complete(
    model: CompleterModel,
    g: Grammar,
    prefix: DesignSequence,
    k: int,
    max_new_tokens: Optional[int] = None,
) -> list[Completion]:
    """Up to k valid completions, best (length-normalized) first.

    Returns an empty list when no valid completion exists within the token
    budget.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    vocab = model.vocab
    prefix_tokens = tokenize(g, vocab, prefix, max_len=None)[:-1]  # drop EOS
    state = initial_state(g, prefix.shape_type)
    for app in prefix.applications:
        state = step(state, app)

    budget = model.config.max_len - len(prefix_tokens) - 1
    if max_new_tokens is not None:
        budget = min(budget, max_new_tokens)
    if budget < 1:
        raise TokenizeError("prefix leaves no room for generation")

    beam_width = max(k, 4)
    live = [_Hypothesis(tokens=list(prefix_tokens), state=state, log_prob=0.0, generated=0)]
    finished: list[Completion] = []

    while live:
        candidates: list[tuple[float, tuple, _Hypothesis, int, float]] = []
        for hyp in live:
            logits = model.logits_last(hyp.tokens)
            logp = _log_softmax(logits)
            if hyp.partial_rule is not None:
                allowed = list(range(vocab.param_base, vocab.size))
            else:
                legal = legal_rules(g, hyp.state)
                allowed = [
                    vocab.rule_token(rid) for rid in _viable_rules(g, hyp.state, legal)
                ]
                if not check_state(hyp.state):
                    allowed.append(EOS)
            for tok in allowed:
                lp = hyp.log_prob + float(logp[tok])
                candidates.append((-lp, tuple(hyp.tokens + [tok]), hyp, tok, float(logp[tok])))
        candidates.sort(key=lambda c: (c[0], c[1]))

        next_live: list[_Hypothesis] = []
        for neg_lp, _, hyp, tok, tok_lp in candidates:
            # EOS candidates always finish; they never consume a live slot
            if tok != EOS and len(next_live) >= beam_width:
                continue
            nxt = _advance(hyp, tok, tok_lp, model, g)
            if nxt is None:
                continue
            if tok == EOS:
                finished.append(
                    Completion(
                        suffix=nxt.state.applications[len(prefix.applications) :],
                        score=nxt.log_prob / nxt.generated,
                        log_likelihood=nxt.log_prob,
                        tokens=tuple(nxt.tokens[len(prefix_tokens) :]),
                    )
                )
            elif nxt.generated < budget:
                next_live.append(nxt)
        live = next_live
        if len(finished) >= 4 * beam_width:
            break

    finished.sort(key=lambda c: (-c.score, c.tokens))
    return finished[:k]


def score_completion(
    model: CompleterModel,
    g: Grammar,
    prefix: DesignSequence,
    suffix: tuple[RuleApplication, ...],
) -> float:
    """Unmasked model log-likelihood of a suffix (plus EOS) given the prefix."""
    full = DesignSequence(
        shape_type=prefix.shape_type,
        applications=prefix.applications + tuple(suffix),
    )
    tokens = tokenize(g, model.vocab, full, max_len=model.config.max_len)
    prefix_len = len(tokenize(g, model.vocab, prefix, max_len=None)) - 1
    logits = model.forward(np.asarray(tokens)[None, :])[0]
    total = 0.0
    for t in range(prefix_len - 1, len(tokens) - 1):
        lp = _log_softmax(logits[t])
        total += float(lp[tokens[t + 1]])
    return total
