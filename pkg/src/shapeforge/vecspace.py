"""Fixed-shape numeric encoding of design sequences.

Each rule application becomes one row of width D = R + P + 1: a one-hot
block over the grammar's R rules, P parameter slots normalized to [0, 1]
by each param's declared range (unused slots zero), and a trailing
occupancy mask bit. A design is an M_max x D matrix with occupied rows as
a prefix, plus a one-hot shape type label. Host attachments ride alongside
as integers; they are not part of the learned matrix and get repaired from
rule legality when decoding generated outputs.

The componentwise sum of occupied rows is the design's node in the
multi-dimension design space: the origin is the empty design and each rule
vector is one step of the route to the solution node.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Union

import numpy as np

from .grammar.engine import initial_state, legal_rules, step
from .grammar.model import (
    DesignSequence,
    Grammar,
    GrammarViolation,
    Rule,
    RuleApplication,
)

DEFAULT_MAX_RULES = 32


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True)
class SpaceConfig:
    """Shape of the embedding space for one grammar."""

    max_rules: int
    rule_vocab_size: int
    max_params: int

    @property
    def row_width(self) -> int:
        return self.rule_vocab_size + self.max_params + 1

    @property
    def mask_col(self) -> int:
        return self.row_width - 1

    @staticmethod
    def for_grammar(g: Grammar, max_rules: int = DEFAULT_MAX_RULES) -> "SpaceConfig":
        return SpaceConfig(
            max_rules=max_rules,
            rule_vocab_size=len(g.rules),
            max_params=g.max_rule_arity,
        )

    def to_dict(self) -> dict:
        return {
            "maxRules": self.max_rules,
            "ruleVocabSize": self.rule_vocab_size,
            "maxParams": self.max_params,
        }

    @staticmethod
    def from_dict(d: dict) -> "SpaceConfig":
        return SpaceConfig(
            max_rules=int(d["maxRules"]),
            rule_vocab_size=int(d["ruleVocabSize"]),
            max_params=int(d["maxParams"]),
        )


@dataclass(frozen=True)
class EmbeddedSequence:
    """One design as training substrate: matrix + label + host indices."""

    matrix: np.ndarray  # (M_max, D) float64
    label: str
    host_indices: tuple[int, ...]
    provenance: str = "seed"

    def occupied_rows(self, threshold: float = 0.5) -> int:
        mask = self.matrix[:, -1] >= threshold
        n = 0
        for m in mask:
            if not m:
                break
            n += 1
        return n

    def label_onehot(self, g: Grammar) -> np.ndarray:
        vec = np.zeros(len(g.shape_types))
        vec[g.shape_types.index(self.label)] = 1.0
        return vec

    def to_dict(self) -> dict:
        return {
            "shapeType": self.label,
            "matrix": self.matrix.tolist(),
            "hostIndices": list(self.host_indices),
            "provenance": self.provenance,
        }

    @staticmethod
    def from_dict(d: dict) -> "EmbeddedSequence":
        return EmbeddedSequence(
            matrix=np.asarray(d["matrix"], dtype=np.float64),
            label=d["shapeType"],
            host_indices=tuple(int(h) for h in d["hostIndices"]),
            provenance=d.get("provenance", "seed"),
        )


def normalize_param(spec, value: float) -> float:
    if spec.span == 0:
        return 0.0
    return (value - spec.min) / spec.span


def denormalize_param(spec, t: float) -> float:
    t = min(max(t, 0.0), 1.0)
    value = spec.min + t * spec.span
    if spec.kind == "integer":
        value = float(round(value))
    return min(max(value, spec.min), spec.max)


def embed_sequence(g: Grammar, cfg: SpaceConfig, s: DesignSequence) -> EmbeddedSequence:
    """Encode a valid sequence; inverse of ``snap_sequence`` on clean inputs."""
    if len(s) > cfg.max_rules:
        raise EmbeddingError(
            f"sequence has {len(s)} rules, embedding capacity is {cfg.max_rules}"
        )
    if s.shape_type not in g.shape_types:
        raise EmbeddingError(f"unknown shape type {s.shape_type!r}")
    mat = np.zeros((cfg.max_rules, cfg.row_width))
    hosts = [-1] * cfg.max_rules
    for i, app in enumerate(s.applications):
        rule = g.rule(app.rule_id)
        mat[i, g.rule_index(app.rule_id)] = 1.0
        for j, (spec, value) in enumerate(zip(rule.params, app.param_values)):
            mat[i, cfg.rule_vocab_size + j] = normalize_param(spec, value)
        mat[i, cfg.mask_col] = 1.0
        hosts[i] = app.host_occurrence
    return EmbeddedSequence(matrix=mat, label=s.shape_type, host_indices=tuple(hosts))


def decode_row(
    g: Grammar, cfg: SpaceConfig, row: np.ndarray, host_index: int
) -> RuleApplication:
    """Snap one real-valued row to the nearest representable application.

    Total: the rule block is resolved by argmax (ties to the lower index),
    params are de-normalized then clamped into range, integers rounded.
    """
    rule_block = row[: cfg.rule_vocab_size]
    idx = int(np.argmax(rule_block))
    rule = g.rules[idx]
    return RuleApplication(
        rule_id=rule.id,
        host_occurrence=host_index,
        param_values=_decode_params(cfg, rule, row),
    )


def _decode_params(cfg: SpaceConfig, rule: Rule, row: np.ndarray) -> tuple[float, ...]:
    return tuple(
        denormalize_param(spec, float(row[cfg.rule_vocab_size + j]))
        for j, spec in enumerate(rule.params)
    )


@dataclass(frozen=True)
class SnapFailure:
    """Row at which no legal rule could absorb a generated output."""

    row: int
    reason: str

    def __bool__(self) -> bool:  # failures are falsy results
        return False


def snap_sequence(
    g: Grammar, cfg: SpaceConfig, e: EmbeddedSequence
) -> Union[DesignSequence, SnapFailure]:
    """Greedy left-to-right repair of a (possibly generated) embedding.

    Each occupied row's rule is re-ranked to the highest-scoring member of
    the legal set at that prefix (score = the row's value for that rule,
    ties to the lower rule index). The embedded host index is kept when it
    is admissible for the chosen rule; otherwise the least-loaded
    admissible host is used. Decoding stops at the first row whose mask is
    below 0.5.
    """
    if e.label not in g.shape_types:
        return SnapFailure(row=-1, reason=f"unknown shape type {e.label!r}")
    state = initial_state(g, e.label)
    for i in range(cfg.max_rules):
        row = e.matrix[i]
        if row[cfg.mask_col] < 0.5:
            break
        legal = legal_rules(g, state)
        if not legal:
            return SnapFailure(row=i, reason="no legal rule at this prefix")
        embedded_host = e.host_indices[i] if i < len(e.host_indices) else -1
        candidates = sorted(
            legal, key=lambda rid: (-float(row[g.rule_index(rid)]), g.rule_index(rid))
        )
        placed = None
        for rid in candidates:
            rule = g.rule(rid)
            hosts = legal[rid]
            if embedded_host in hosts:
                host = embedded_host
            else:
                host = min(hosts, key=lambda h: (state.host_load.get(h, 0), h))
            app = RuleApplication(rid, host, _decode_params(cfg, rule, row))
            try:
                placed = step(state, app)
                break
            except GrammarViolation:
                continue
        if placed is None:
            return SnapFailure(row=i, reason="no legal rule accepts decoded params")
        state = placed
    return DesignSequence(shape_type=e.label, applications=state.applications)


def solution_node(e: EmbeddedSequence) -> np.ndarray:
    """Sum of occupied rule vectors: the design's node in the vector space."""
    mask = e.matrix[:, -1] >= 0.5
    return e.matrix[mask].sum(axis=0) if mask.any() else np.zeros(e.matrix.shape[1])


# ---------------------------------------------------------------------------
# dataset file format: JSON-lines, one record per design


def dumps_record(e: EmbeddedSequence) -> str:
    return json.dumps(e.to_dict(), sort_keys=True, separators=(",", ":"))


def write_dataset(path, records: Iterable[EmbeddedSequence]) -> int:
    n = 0
    with open(path, "w", encoding="utf-8") as fh:
        for e in records:
            fh.write(dumps_record(e))
            fh.write("\n")
            n += 1
    return n


def read_dataset(path) -> list[EmbeddedSequence]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(EmbeddedSequence.from_dict(json.loads(line)))
    return out
