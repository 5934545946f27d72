"""Structural validation of grammar values.

Parsing already rejects dangling references, so most issues reported here
arise from grammars built programmatically. An empty report means every
Grammar invariant holds and each constraint is satisfiable in isolation.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .engine import _relation_feasible
from .model import (
    PRIMITIVE_ARITY,
    CountRange,
    Excludes,
    Grammar,
    ParamRelation,
    ParamSpec,
    Requires,
)


@dataclass(frozen=True)
class Issue:
    where: str
    message: str

    def to_dict(self) -> dict:
        return {"where": self.where, "message": self.message}

    def __str__(self) -> str:
        return f"{self.where}: {self.message}"


def _check_param(issues: list[Issue], where: str, p: ParamSpec) -> None:
    if p.min > p.max:
        issues.append(Issue(where, f"param {p.name!r} has min {p.min} > max {p.max}"))
    if p.kind == "integer" and (p.min != round(p.min) or p.max != round(p.max)):
        issues.append(Issue(where, f"integer param {p.name!r} has non-integral bounds"))
    if p.kind not in ("continuous", "integer"):
        issues.append(Issue(where, f"param {p.name!r} has unknown kind {p.kind!r}"))


def validate_grammar(g: Grammar) -> list[Issue]:
    issues: list[Issue] = []

    if not g.shape_types:
        issues.append(Issue("grammar", "at least one shape type is required"))
    dup_types = [t for t, c in Counter(g.shape_types).items() if c > 1]
    for t in dup_types:
        issues.append(Issue("grammar", f"duplicate shape type {t!r}"))

    unit_names = Counter(u.name for u in g.units)
    for name, c in unit_names.items():
        if c > 1:
            issues.append(Issue(f"unit {name}", "duplicate unit name"))

    if g.axiom not in unit_names:
        issues.append(Issue("grammar", f"axiom references undefined unit {g.axiom!r}"))

    for u in g.units:
        where = f"unit {u.name}"
        arity = PRIMITIVE_ARITY.get(u.primitive)
        if arity is None:
            issues.append(Issue(where, f"unknown primitive {u.primitive!r}"))
        elif len(u.size_params) != arity:
            issues.append(
                Issue(
                    where,
                    f"primitive {u.primitive!r} needs {arity} size params, has {len(u.size_params)}",
                )
            )
        for p in u.size_params:
            _check_param(issues, where, p)
        port_names = Counter(p.name for p in u.ports)
        for pname, c in port_names.items():
            if c > 1:
                issues.append(Issue(where, f"duplicate port {pname!r}"))
        if u.name != g.axiom and not u.ports:
            issues.append(Issue(where, "non-root unit declares no attachment ports"))

    rule_ids = Counter(r.id for r in g.rules)
    for rid, c in rule_ids.items():
        if c > 1:
            issues.append(Issue(f"rule {rid}", "duplicate rule id"))

    for r in g.rules:
        where = f"rule {r.id}"
        if r.adds_unit not in unit_names:
            issues.append(Issue(where, f"adds undefined unit {r.adds_unit!r}"))
        if r.host_unit not in unit_names:
            issues.append(Issue(where, f"hosts on undefined unit {r.host_unit!r}"))
        elif not any(p.name == r.host_port for p in g.unit(r.host_unit).ports):
            issues.append(Issue(where, f"references undefined port {r.host_unit}.{r.host_port}"))
        if r.symmetry < 1:
            issues.append(Issue(where, f"symmetry must be >= 1, got {r.symmetry}"))
        for p in r.params:
            _check_param(issues, where, p)

    cids = Counter(c.id for c in g.constraints)
    for cid, c in cids.items():
        if c > 1:
            issues.append(Issue(f"constraint {cid}", "duplicate constraint id"))

    for c in g.constraints:
        where = f"constraint {c.id}"
        if c.when is not None and c.when not in g.shape_types:
            issues.append(Issue(where, f"unknown shape type {c.when!r}"))
        if isinstance(c, CountRange):
            if c.unit not in unit_names:
                issues.append(Issue(where, f"references undefined unit {c.unit!r}"))
            if c.lo > c.hi:
                issues.append(Issue(where, f"count range lo {c.lo} > hi {c.hi}"))
            if c.lo < 0:
                issues.append(Issue(where, f"count range lo {c.lo} is negative"))
        elif isinstance(c, (Requires, Excludes)):
            for rid in (c.a, c.b):
                if rid not in rule_ids:
                    issues.append(Issue(where, f"references undefined rule {rid!r}"))
            if isinstance(c, Excludes) and c.a == c.b:
                issues.append(Issue(where, "rule excludes itself (never applicable)"))
        elif isinstance(c, ParamRelation):
            if c.rule not in rule_ids:
                issues.append(Issue(where, f"references undefined rule {c.rule!r}"))
            else:
                rule = g.rule(c.rule)
                names = {p.name for p in rule.params}
                missing = [n for _, n in c.terms if n not in names]
                for nm in missing:
                    issues.append(Issue(where, f"references undefined param {nm!r}"))
                if not missing and not _relation_feasible(c, rule):
                    issues.append(Issue(where, "relation unsatisfiable within param ranges"))

    return issues
