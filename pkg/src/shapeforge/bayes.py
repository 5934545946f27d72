"""Bayesian scoring of design solutions from a quantitative causal map.

A causal map is a weighted DAG of binary evaluation criteria with one sink
node collecting the comprehensive score. It converts to a Bayesian network
by a logistic CPT rule: P(node=high | parents) = sigmoid(bias + sum of
w_i * s_i) with s_i = +1 for a high parent and -1 for a low one; roots use
sigmoid(bias). Scoring a solution is exact posterior inference of the sink
given whatever subset of criteria is observed, so incomplete evaluation
inputs are fine. Inference is variable elimination; nets are capped at 25
nodes since criteria maps stay small by construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .grammar.engine import replay
from .grammar.fixtures import DRONE_MASS_BOUND
from .grammar.geometry import find_collisions
from .grammar.model import CountRange, DesignSequence, Grammar

HIGH, LOW = "high", "low"
MAX_NODES = 25


class CausalMapError(ValueError):
    pass


@dataclass(frozen=True)
class CausalMap:
    """Weighted criteria DAG with a designated comprehensive-score sink."""

    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str, float], ...]  # (from, to, weight)
    biases: dict[str, float] = field(default_factory=dict)
    sink: str = "comprehensive-score"

    def bias(self, node: str) -> float:
        return self.biases.get(node, 0.0)

    def to_dict(self) -> dict:
        return {
            "nodes": list(self.nodes),
            "edges": [{"from": a, "to": b, "weight": w} for a, b, w in self.edges],
            "biases": dict(self.biases),
            "sink": self.sink,
        }

    @staticmethod
    def from_dict(d: dict) -> "CausalMap":
        return CausalMap(
            nodes=tuple(d["nodes"]),
            edges=tuple((e["from"], e["to"], float(e["weight"])) for e in d["edges"]),
            biases={k: float(v) for k, v in d.get("biases", {}).items()},
            sink=d.get("sink", "comprehensive-score"),
        )


def _sigmoid(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    ex = math.exp(x)
    return ex / (1.0 + ex)


@dataclass(frozen=True)
class BayesNet:
    """The causal map in conditional-probability form (topological order)."""

    nodes: tuple[str, ...]
    parents: dict[str, tuple[str, ...]]
    # cpt[node][parent-state index] = P(node=high | parents); parent states
    # enumerate parent tuples in binary order, low=0 / high=1 per position
    cpt: dict[str, np.ndarray]
    sink: str

    def prob_high(self, node: str, parent_states: Sequence[int]) -> float:
        idx = 0
        for s in parent_states:
            idx = idx * 2 + s
        return float(self.cpt[node][idx])


def causal_map_to_bayesnet(m: CausalMap) -> BayesNet:
    """Build CPTs from edge weights; raises on cycles or multiple sinks."""
    if len(m.nodes) > MAX_NODES:
        raise CausalMapError(f"too many nodes ({len(m.nodes)} > {MAX_NODES})")
    if len(set(m.nodes)) != len(m.nodes):
        raise CausalMapError("duplicate node names")
    if m.sink not in m.nodes:
        raise CausalMapError(f"sink {m.sink!r} is not a node")
    for a, b, w in m.edges:
        for n in (a, b):
            if n not in m.nodes:
                raise CausalMapError(f"edge references unknown node {n!r}")
        if not (-1.0 <= w <= 1.0):
            raise CausalMapError(f"edge {a}->{b} weight {w} outside [-1, 1]")

    parents: dict[str, list[tuple[str, float]]] = {n: [] for n in m.nodes}
    children: dict[str, list[str]] = {n: [] for n in m.nodes}
    for a, b, w in m.edges:
        parents[b].append((a, w))
        children[a].append(b)

    sinks = [n for n in m.nodes if not children[n]]
    if sinks != [m.sink]:
        raise CausalMapError(
            f"exactly one sink expected ({m.sink!r}); childless nodes: {sinks}"
        )

    # Kahn topological sort, stable in declaration order; leftovers mean a cycle
    indeg = {n: len(parents[n]) for n in m.nodes}
    order: list[str] = []
    ready = [n for n in m.nodes if indeg[n] == 0]
    while ready:
        n = ready.pop(0)
        order.append(n)
        for c in children[n]:
            indeg[c] -= 1
            if indeg[c] == 0:
                ready.append(c)
    if len(order) != len(m.nodes):
        cyc = sorted(set(m.nodes) - set(order))
        raise CausalMapError(f"cycle detected among {cyc}")

    cpt: dict[str, np.ndarray] = {}
    for n in m.nodes:
        ps = parents[n]
        k = len(ps)
        table = np.empty(2**k)
        for idx in range(2**k):
            acc = m.bias(n)
            for j, (_, w) in enumerate(ps):
                bit = (idx >> (k - 1 - j)) & 1
                acc += w * (1.0 if bit else -1.0)
            table[idx] = _sigmoid(acc)
        cpt[n] = table

    return BayesNet(
        nodes=tuple(order),
        parents={n: tuple(p for p, _ in parents[n]) for n in m.nodes},
        cpt=cpt,
        sink=m.sink,
    )


Evidence = dict


def _validate_evidence(net: BayesNet, ev: Evidence) -> None:
    for node, val in ev.items():
        if node not in net.cpt:
            raise KeyError(f"evidence on unknown node {node!r}")
        if node == net.sink:
            raise ValueError("the sink is inferred, never observed")
        if val not in (HIGH, LOW):
            raise ValueError(f"evidence value must be 'high' or 'low', got {val!r}")


@dataclass
class _Factor:
    vars: tuple[str, ...]
    table: np.ndarray  # one axis of size 2 per var, low=0 / high=1

    def reduce(self, node: str, value: int) -> "_Factor":
        axis = self.vars.index(node)
        return _Factor(
            vars=self.vars[:axis] + self.vars[axis + 1 :],
            table=np.take(self.table, value, axis=axis),
        )


def _multiply(a: _Factor, b: _Factor) -> _Factor:
    all_vars = a.vars + tuple(v for v in b.vars if v not in a.vars)
    ta = a.table.reshape(a.table.shape + (1,) * (len(all_vars) - len(a.vars)))
    # move b's axes into position
    perm_shape = [2 if v in b.vars else 1 for v in all_vars]
    tb = np.ones(perm_shape)
    src = b.table
    order = [b.vars.index(v) for v in all_vars if v in b.vars]
    tb_full = np.transpose(src, axes=order).reshape(perm_shape)
    return _Factor(vars=all_vars, table=ta * tb_full)


def _marginalize(f: _Factor, node: str) -> _Factor:
    axis = f.vars.index(node)
    return _Factor(
        vars=f.vars[:axis] + f.vars[axis + 1 :], table=f.table.sum(axis=axis)
    )


def infer_score(net: BayesNet, ev: Optional[Evidence] = None) -> float:
    """Exact P(sink=high | evidence) by variable elimination."""
    ev = dict(ev or {})
    _validate_evidence(net, ev)

    factors: list[_Factor] = []
    for n in net.nodes:
        vars_ = net.parents[n] + (n,)
        table = np.stack([1.0 - net.cpt[n], net.cpt[n]], axis=-1).reshape((2,) * len(vars_))
        f = _Factor(vars=vars_, table=table)
        for node, val in ev.items():
            if node in f.vars:
                f = f.reduce(node, 1 if val == HIGH else 0)
        factors.append(f)

    hidden = [n for n in net.nodes if n != net.sink and n not in ev]
    # min-degree elimination, name tie-break, for deterministic small runs
    while hidden:
        degree = {}
        for h in hidden:
            touched = set()
            for f in factors:
                if h in f.vars:
                    touched.update(f.vars)
            degree[h] = len(touched)
        h = min(hidden, key=lambda x: (degree[x], x))
        hidden.remove(h)
        related = [f for f in factors if h in f.vars]
        rest = [f for f in factors if h not in f.vars]
        prod = related[0]
        for f in related[1:]:
            prod = _multiply(prod, f)
        factors = rest + [_marginalize(prod, h)]

    result = factors[0]
    for f in factors[1:]:
        result = _multiply(result, f)
    if result.vars == ():
        raise RuntimeError("sink eliminated; inconsistent state")
    table = result.table.reshape(2) if result.vars == (net.sink,) else None
    if table is None:
        raise RuntimeError(f"unexpected residual vars {result.vars}")
    total = table.sum()
    if total <= 0:
        raise RuntimeError("zero-probability evidence")
    return float(table[1] / total)


# ---------------------------------------------------------------------------
# criteria extraction from realized designs

#: Extractor names and their value on the empty (axiom-only) design:
#: no-collision and symmetry-consistent hold vacuously, mass-proxy compares
#: the bare axiom volume against the bound, the rest read low.
CRITERIA = (
    "no-collision",
    "motor-count-matches-type",
    "symmetry-consistent",
    "mass-proxy-below-bound",
    "has-landing-gear",
)


def derive_evidence(
    g: Grammar,
    s: DesignSequence,
    gear_unit: str = "skid",
    mass_bound: float = DRONE_MASS_BOUND,
) -> Evidence:
    """Deterministic binary evidence for the declared criteria extractors.

    - no-collision: no two bounding boxes overlap.
    - motor-count-matches-type: every count-range tied to this shape type is
      satisfied (for the drone fixture that is exactly the motor/arm/prop
      counts the label promises).
    - symmetry-consistent: for every unit kind with several occurrences, the
      number of applications hosted per occurrence is uniform.
    - mass-proxy-below-bound: total primitive volume stays under the bound.
    - has-landing-gear: at least one ``gear_unit`` occurrence exists.
    """
    state = replay(g, s)
    ev: Evidence = {}

    ev["no-collision"] = LOW if find_collisions(list(state.occurrences)) else HIGH

    typed = [
        c
        for c in g.constraints
        if isinstance(c, CountRange) and c.when == s.shape_type
    ]
    matches = all(c.lo <= state.count(c.unit) <= c.hi for c in typed)
    ev["motor-count-matches-type"] = HIGH if (typed and matches) else LOW

    loads: dict[str, list[int]] = {}
    for i, occ in enumerate(state.occurrences):
        loads.setdefault(occ.unit_name, []).append(state.host_load.get(i, 0))
    consistent = all(
        len(set(v)) == 1 for v in loads.values() if len(v) >= 2
    )
    ev["symmetry-consistent"] = HIGH if consistent else LOW

    mass = sum(o.volume for o in state.occurrences)
    ev["mass-proxy-below-bound"] = HIGH if mass < mass_bound else LOW

    ev["has-landing-gear"] = HIGH if state.count(gear_unit) > 0 else LOW
    return ev


@dataclass(frozen=True)
class SelectPolicy:
    """Either keep everything scoring >= threshold, or the k best."""

    threshold: Optional[float] = None
    top_k: Optional[int] = None

    def __post_init__(self) -> None:
        if (self.threshold is None) == (self.top_k is None):
            raise ValueError("set exactly one of threshold / top_k")


def score_solution(net: BayesNet, g: Grammar, s: DesignSequence, **extractor_args) -> float:
    ev = derive_evidence(g, s, **extractor_args)
    known = {k: v for k, v in ev.items() if k in net.cpt and k != net.sink}
    return infer_score(net, known)


def select(
    solutions: Sequence[DesignSequence],
    net: BayesNet,
    g: Grammar,
    policy: SelectPolicy,
    **extractor_args,
) -> list[tuple[int, float]]:
    """Kept (index, score) pairs in original order; ties keep earlier items."""
    scores = [score_solution(net, g, s, **extractor_args) for s in solutions]
    if policy.threshold is not None:
        return [(i, sc) for i, sc in enumerate(scores) if sc >= policy.threshold]
    k = max(0, int(policy.top_k))
    ranked = sorted(range(len(scores)), key=lambda i: (-scores[i], i))[:k]
    return [(i, scores[i]) for i in sorted(ranked)]
