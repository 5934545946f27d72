"""Rule sequence interpretation: replay, legality, and constraint checking.

Constraints split into two groups:

* prefix-checkable — violated prefixes can never recover, so ``apply_rule``
  rejects them outright: parameter ranges, count-range upper bounds, excludes
  pairs, and per-application param relations.
* whole-solution — only meaningful on a finished design, evaluated by
  ``check_constraints``: count-range lower bounds, requires pairs, and
  bounding-box collisions.

``ReplayState`` carries the incrementally built occurrence list so long
sequences, snapping, and beam decoding stay linear in sequence length.
"""

from __future__ import annotations

from dataclasses import dataclass

from .geometry import (
    Assembly,
    Frame,
    Occurrence,
    default_sizes,
    find_collisions,
    make_occurrence,
    place_children,
)
from .model import (
    CountRange,
    DesignSequence,
    Excludes,
    Grammar,
    GrammarViolation,
    ParamRelation,
    NoCollision,
    Requires,
    Rule,
    RuleApplication,
    Violation,
)


@dataclass(frozen=True)
class ReplayState:
    """State after replaying a prefix of rule applications."""

    grammar: Grammar
    shape_type: str
    occurrences: tuple[Occurrence, ...]
    unit_counts: dict[str, int]
    rule_counts: dict[str, int]
    host_load: dict[int, int]  # applications targeting each occurrence
    applications: tuple[RuleApplication, ...]

    def count(self, unit_name: str) -> int:
        return self.unit_counts.get(unit_name, 0)


def initial_state(g: Grammar, shape_type: str) -> ReplayState:
    if shape_type not in g.shape_types:
        raise ValueError(f"unknown shape type {shape_type!r}")
    axiom_unit = g.unit(g.axiom)
    root = make_occurrence(axiom_unit, Frame.identity(), default_sizes(axiom_unit))
    return ReplayState(
        grammar=g,
        shape_type=shape_type,
        occurrences=(root,),
        unit_counts={axiom_unit.name: 1},
        rule_counts={},
        host_load={},
        applications=(),
    )


def _check_params(rule: Rule, app: RuleApplication) -> Violation | None:
    if len(app.param_values) != rule.arity:
        return Violation(
            "param-arity",
            "param-arity",
            f"rule {rule.id!r} takes {rule.arity} params, got {len(app.param_values)}",
        )
    for spec, value in zip(rule.params, app.param_values):
        if not spec.contains(value):
            kind_note = " (integer)" if spec.kind == "integer" else ""
            return Violation(
                "param-range",
                "param-range",
                f"rule {rule.id!r} param {spec.name!r}={value} outside "
                f"[{spec.min}, {spec.max}]{kind_note}",
            )
    return None


def _prefix_violation(state: ReplayState, app: RuleApplication) -> Violation | None:
    """First prefix-checkable violation adding ``app`` would cause, if any."""
    g = state.grammar
    if not g.has_rule(app.rule_id):
        return Violation("unknown-rule", "unknown-rule", f"unknown rule {app.rule_id!r}")
    rule = g.rule(app.rule_id)

    if not (0 <= app.host_occurrence < len(state.occurrences)):
        return Violation(
            "host-occurrence",
            "host",
            f"host occurrence {app.host_occurrence} does not exist "
            f"({len(state.occurrences)} placed)",
        )
    host = state.occurrences[app.host_occurrence]
    if host.unit_name != rule.host_unit:
        return Violation(
            "host-unit",
            "host",
            f"rule {rule.id!r} expects host unit {rule.host_unit!r}, "
            f"occurrence {app.host_occurrence} is {host.unit_name!r}",
        )

    bad = _check_params(rule, app)
    if bad is not None:
        return bad

    for c in g.constraints_for(state.shape_type):
        if isinstance(c, CountRange) and c.unit == rule.adds_unit:
            after = state.count(c.unit) + rule.symmetry
            if after > c.hi:
                return Violation(
                    c.id,
                    c.kind,
                    f"adding {rule.symmetry} x {c.unit!r} gives {after}, over limit {c.hi}",
                )
        elif isinstance(c, Excludes) and app.rule_id in (c.a, c.b):
            other = c.b if app.rule_id == c.a else c.a
            if state.rule_counts.get(other, 0) > 0:
                return Violation(
                    c.id, c.kind, f"rule {app.rule_id!r} excluded by applied rule {other!r}"
                )
        elif isinstance(c, ParamRelation) and c.rule == app.rule_id:
            values = {p.name: v for p, v in zip(rule.params, app.param_values)}
            if not c.holds(values):
                expr = " + ".join(f"{coef}*{n}" for coef, n in c.terms)
                return Violation(
                    c.id, c.kind, f"param relation {expr} {c.op} {c.rhs} violated"
                )
    return None


def step(state: ReplayState, app: RuleApplication) -> ReplayState:
    """Extend a replay state by one application; raises GrammarViolation."""
    bad = _prefix_violation(state, app)
    if bad is not None:
        raise GrammarViolation(bad)
    g = state.grammar
    rule = g.rule(app.rule_id)
    host = state.occurrences[app.host_occurrence]
    children = place_children(g, host, rule, app.param_values)

    unit_counts = dict(state.unit_counts)
    unit_counts[rule.adds_unit] = unit_counts.get(rule.adds_unit, 0) + rule.symmetry
    rule_counts = dict(state.rule_counts)
    rule_counts[rule.id] = rule_counts.get(rule.id, 0) + 1
    host_load = dict(state.host_load)
    host_load[app.host_occurrence] = host_load.get(app.host_occurrence, 0) + 1

    return ReplayState(
        grammar=g,
        shape_type=state.shape_type,
        occurrences=state.occurrences + tuple(children),
        unit_counts=unit_counts,
        rule_counts=rule_counts,
        host_load=host_load,
        applications=state.applications + (app,),
    )


def replay(g: Grammar, s: DesignSequence) -> ReplayState:
    """Replay a sequence from the axiom; raises GrammarViolation on failure."""
    state = initial_state(g, s.shape_type)
    for app in s.applications:
        state = step(state, app)
    return state


def apply_rule(g: Grammar, s: DesignSequence, app: RuleApplication) -> DesignSequence:
    """Validate one application against the prefix and append it."""
    state = replay(g, s)
    step(state, app)  # raises on violation
    return s.extended(app)


def _relation_feasible(c: ParamRelation, rule: Rule) -> bool:
    """Whether any in-range assignment satisfies a linear relation (box max)."""
    specs = {p.name: p for p in rule.params}
    best = 0.0
    for coef, name in c.terms:
        p = specs[name]
        if c.op == ">=":
            best += coef * (p.max if coef >= 0 else p.min)
        else:
            best += coef * (p.min if coef >= 0 else p.max)
    return best >= c.rhs if c.op == ">=" else best <= c.rhs


def legal_rules(g: Grammar, state_or_seq) -> dict[str, list[int]]:
    """Map of rule id -> admissible host occurrence indices at this prefix.

    A rule is listed when some parameter assignment keeps every count-range,
    requires, and excludes constraint satisfiable (requires is always
    future-satisfiable on a prefix; count-range gates on the upper bound).
    """
    state = state_or_seq
    if isinstance(state_or_seq, DesignSequence):
        state = replay(g, state_or_seq)
    out: dict[str, list[int]] = {}
    active = state.grammar.constraints_for(state.shape_type)
    for rule in g.rules:
        blocked = False
        for c in active:
            if isinstance(c, CountRange) and c.unit == rule.adds_unit:
                if state.count(c.unit) + rule.symmetry > c.hi:
                    blocked = True
                    break
            elif isinstance(c, Excludes) and rule.id in (c.a, c.b):
                other = c.b if rule.id == c.a else c.a
                if state.rule_counts.get(other, 0) > 0:
                    blocked = True
                    break
            elif isinstance(c, ParamRelation) and c.rule == rule.id:
                if not _relation_feasible(c, rule):
                    blocked = True
                    break
        if blocked:
            continue
        hosts = [
            i for i, occ in enumerate(state.occurrences) if occ.unit_name == rule.host_unit
        ]
        if hosts:
            out[rule.id] = hosts
    return out


def check_constraints(g: Grammar, s: DesignSequence) -> list[Violation]:
    """Complete whole-solution evaluation (assumes the sequence replays)."""
    state = replay(g, s)
    return check_state(state)


def check_state(state: ReplayState) -> list[Violation]:
    g = state.grammar
    violations: list[Violation] = []
    for c in g.constraints_for(state.shape_type):
        if isinstance(c, CountRange):
            n = state.count(c.unit)
            if not (c.lo <= n <= c.hi):
                violations.append(
                    Violation(
                        c.id,
                        c.kind,
                        f"{c.unit!r} count {n} outside [{c.lo}, {c.hi}]",
                    )
                )
        elif isinstance(c, Requires):
            if state.rule_counts.get(c.a, 0) > 0 and state.rule_counts.get(c.b, 0) == 0:
                violations.append(
                    Violation(c.id, c.kind, f"rule {c.a!r} requires rule {c.b!r}")
                )
        elif isinstance(c, NoCollision):
            for i, j in find_collisions(list(state.occurrences)):
                a, b = state.occurrences[i], state.occurrences[j]
                violations.append(
                    Violation(
                        c.id,
                        c.kind,
                        f"occurrences {i} ({a.unit_name}) and {j} ({b.unit_name}) overlap",
                    )
                )
    return violations


def realize(g: Grammar, s: DesignSequence) -> Assembly:
    """Deterministic geometric realization of a valid sequence."""
    state = replay(g, s)
    return Assembly(occurrences=state.occurrences)


def least_loaded_host(state: ReplayState, hosts: list[int]) -> int:
    """Deterministic host pick: fewest child applications, then lowest index."""
    return min(hosts, key=lambda h: (state.host_load.get(h, 0), h))
