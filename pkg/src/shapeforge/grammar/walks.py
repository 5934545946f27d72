"""Random-but-valid design sequence synthesis.

Walks stand in for designer submissions when seeding the generative
pipeline: they satisfy every constraint including collisions, and they
follow a stable construction habit (mandatory structure in rule declaration
order, then optional extras) so learned models see consistent sequence
patterns with parameter and feature variety.

Continuous params are sampled on a uniform grid of ``grid`` steps between
the spec bounds. With integer bounds this keeps the embed/normalize round
trip exact in float64.
"""

from __future__ import annotations

from typing import Optional

import numpy as np

from .engine import (
    ReplayState,
    check_state,
    initial_state,
    legal_rules,
    step,
)
from .geometry import find_collisions
from .model import (
    CountRange,
    DesignSequence,
    Grammar,
    GrammarViolation,
    NoCollision,
    Requires,
    Rule,
    RuleApplication,
)

DEFAULT_GRID = 4096


class WalkFailure(Exception):
    """No valid walk found within the attempt budget."""


def sample_params(rule: Rule, rng: np.random.Generator, grid: int = DEFAULT_GRID) -> tuple[float, ...]:
    values = []
    for p in rule.params:
        if p.kind == "integer":
            values.append(float(rng.integers(int(p.min), int(p.max) + 1)))
        else:
            j = int(rng.integers(0, grid + 1))
            values.append(p.min + (j / grid) * p.span)
    return tuple(values)


def midpoint_params(rule: Rule) -> tuple[float, ...]:
    return tuple(p.midpoint() for p in rule.params)


def _deficient_rules(state: ReplayState, legal: dict[str, list[int]]) -> list[str]:
    """Legal rules whose application progresses an unmet completion constraint."""
    g = state.grammar
    needed_units = set()
    needed_rules = set()
    for c in g.constraints_for(state.shape_type):
        if isinstance(c, CountRange) and state.count(c.unit) < c.lo:
            needed_units.add(c.unit)
        elif isinstance(c, Requires):
            if state.rule_counts.get(c.a, 0) > 0 and state.rule_counts.get(c.b, 0) == 0:
                needed_rules.add(c.b)
    out = []
    for r in g.rules:  # declaration order
        if r.id not in legal:
            continue
        if r.id in needed_rules or r.adds_unit in needed_units:
            out.append(r.id)
    return out


def _collides(state: ReplayState) -> bool:
    if not any(isinstance(c, NoCollision) for c in state.grammar.constraints_for(state.shape_type)):
        return False
    return bool(find_collisions(list(state.occurrences)))


def _try_apply(
    state: ReplayState,
    rule_id: str,
    hosts: list[int],
    rng: np.random.Generator,
    grid: int,
    tries: int = 12,
) -> Optional[ReplayState]:
    g = state.grammar
    rule = g.rule(rule_id)
    ordered_hosts = sorted(hosts, key=lambda h: (state.host_load.get(h, 0), h))
    for host in ordered_hosts:
        for _ in range(tries):
            app = RuleApplication(rule_id, host, sample_params(rule, rng, grid))
            try:
                nxt = step(state, app)
            except GrammarViolation:
                continue
            if _collides(nxt):
                continue
            return nxt
    return None


def generate_walk(
    g: Grammar,
    shape_type: str,
    rng: np.random.Generator,
    grid: int = DEFAULT_GRID,
    p_optional: float = 0.85,
    max_len: int = 32,
    attempts: int = 20,
) -> DesignSequence:
    """One constraint-clean design sequence with at most ``max_len`` rules."""
    for _ in range(attempts):
        state = initial_state(g, shape_type)
        declined: set[str] = set()
        stuck = False
        while len(state.applications) < max_len:
            legal = legal_rules(g, state)
            if not legal:
                break
            required = _deficient_rules(state, legal)
            chosen = None
            if required:
                chosen = required[0]
            else:
                for r in g.rules:
                    if r.id in legal and r.id not in declined:
                        if rng.random() < p_optional:
                            chosen = r.id
                            break
                        declined.add(r.id)
            if chosen is None:
                break
            nxt = _try_apply(state, chosen, legal[chosen], rng, grid)
            if nxt is None:
                if required:
                    stuck = True
                    break
                declined.add(chosen)
                continue
            if not required:
                declined.add(chosen)  # habit: optional extras appear once
            state = nxt
        if not stuck and state.applications and not check_state(state):
            return DesignSequence(shape_type=shape_type, applications=state.applications)
    raise WalkFailure(f"no valid walk for {shape_type!r} in {attempts} attempts")


def generate_corpus(
    g: Grammar,
    n: int,
    seed: int,
    shape_types: Optional[list[str]] = None,
    grid: int = DEFAULT_GRID,
    p_optional: float = 0.85,
    max_len: int = 32,
) -> list[DesignSequence]:
    """n valid walks cycling through shape types, reproducible per seed."""
    rng = np.random.default_rng(seed)
    types = list(shape_types) if shape_types else list(g.shape_types)
    out = []
    for i in range(n):
        st = types[i % len(types)]
        out.append(generate_walk(g, st, rng, grid=grid, p_optional=p_optional, max_len=max_len))
    return out
