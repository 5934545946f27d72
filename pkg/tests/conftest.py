"""Shared fixtures: the bundled drone grammar, corpora, and grammar generators."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from shapeforge.grammar.dsl import parse_grammar
from shapeforge.grammar.fixtures import drone_grammar
from shapeforge.grammar.model import (
    CountRange,
    Excludes,
    Grammar,
    NoCollision,
    ParamRelation,
    ParamSpec,
    Port,
    Requires,
    Rule,
    ShapeUnit,
)
from shapeforge.grammar.walks import generate_corpus

settings.register_profile("ci", deadline=None, derandomize=True, max_examples=50)
settings.load_profile("ci")


@pytest.fixture(scope="session")
def drone():
    return drone_grammar()


@pytest.fixture(scope="session")
def drone_corpus(drone):
    """200 seeded walks shared by the model-facing tests."""
    return generate_corpus(drone, 200, seed=7)


PRIMS = ("box", "cylinder", "sphere", "extrusion-profile")
ARITY = {"box": 3, "cylinder": 2, "sphere": 1, "extrusion-profile": 3}


def random_grammar(seed: int) -> Grammar:
    """A structurally valid random grammar (used for round-trip properties)."""
    rng = np.random.default_rng(seed)

    def param(name: str) -> ParamSpec:
        if rng.random() < 0.25:
            lo = int(rng.integers(0, 50))
            hi = lo + int(rng.integers(1, 20))
            return ParamSpec(name, "count", float(lo), float(hi), "integer")
        lo = float(np.round(rng.uniform(0.5, 80.0), 6))
        hi = lo + float(np.round(rng.uniform(0.5, 60.0), 6))
        return ParamSpec(name, "mm", lo, hi, "continuous")

    n_units = int(rng.integers(1, 6))
    units = []
    for i in range(n_units):
        prim = PRIMS[int(rng.integers(0, len(PRIMS)))]
        ports = tuple(
            Port(
                name=f"p{j}",
                position=tuple(float(np.round(rng.uniform(-0.5, 0.5), 6)) for _ in range(3)),
                orientation=tuple(float(rng.integers(-180, 181)) for _ in range(3)),
            )
            for j in range(int(rng.integers(1, 4)))
        )
        units.append(
            ShapeUnit(
                name=f"u{i}",
                primitive=prim,
                size_params=tuple(param(f"s{k}") for k in range(ARITY[prim])),
                ports=ports,
                center=tuple(float(np.round(rng.uniform(-0.5, 0.5), 6)) for _ in range(3)),
            )
        )

    n_rules = int(rng.integers(0, 7))
    rules = []
    for i in range(n_rules):
        host = units[int(rng.integers(0, n_units))]
        adds = units[int(rng.integers(0, n_units))]
        rules.append(
            Rule(
                id=f"r{i}",
                adds_unit=adds.name,
                host_unit=host.name,
                host_port=host.ports[int(rng.integers(0, len(host.ports)))].name,
                params=tuple(param(f"q{k}") for k in range(int(rng.integers(0, 4)))),
                symmetry=int(rng.integers(1, 5)),
            )
        )

    constraints = []
    cid = 0
    shape_types = tuple(f"type {chr(65 + i)}" for i in range(int(rng.integers(1, 4))))
    for _ in range(int(rng.integers(0, 5))):
        kind = int(rng.integers(0, 5))
        when = shape_types[0] if rng.random() < 0.3 else None
        if kind == 0:
            lo = int(rng.integers(0, 4))
            constraints.append(
                CountRange(
                    id=f"c{cid}",
                    unit=units[int(rng.integers(0, n_units))].name,
                    lo=lo,
                    hi=lo + int(rng.integers(0, 5)),
                    when=when,
                )
            )
        elif kind in (1, 2) and n_rules >= 2:
            a, b = rng.choice(n_rules, size=2, replace=False)
            cls = Requires if kind == 1 else Excludes
            constraints.append(cls(id=f"c{cid}", a=f"r{a}", b=f"r{b}", when=when))
        elif kind == 3 and any(r.params for r in rules):
            candidates = [r for r in rules if r.params]
            r = candidates[int(rng.integers(0, len(candidates)))]
            terms = tuple(
                (float(np.round(rng.uniform(-3, 3), 6)), p.name) for p in r.params
            )
            # pin the relation to hold at the midpoint so legality sampling works
            mid = sum(c * spec.midpoint() for (c, _), spec in zip(terms, r.params))
            op = ">=" if rng.random() < 0.5 else "<="
            slack = float(np.round(rng.uniform(0.0, 5.0), 6))
            rhs = mid - slack if op == ">=" else mid + slack
            constraints.append(
                ParamRelation(id=f"c{cid}", rule=r.id, terms=terms, op=op, rhs=rhs, when=when)
            )
        else:
            constraints.append(NoCollision(id=f"c{cid}", when=when))
        cid += 1

    return Grammar(
        product_kind=f"Product{seed % 97}",
        shape_types=shape_types,
        units=tuple(units),
        rules=tuple(rules),
        constraints=tuple(constraints),
        axiom=units[0].name,
    )


CHAIN_SOURCE_TEMPLATE = """
product Chain
shapetype "chain"

{units}

axiom u0

{rules}

{constraints}
"""


def chain_grammar(length: int = 5) -> Grammar:
    """Linear grammar with exactly one legal continuation at every prefix."""
    units, rules, constraints = [], [], []
    for i in range(length + 1):
        units.append(
            f'unit u{i} box {{\n  param a mm 1.0 2.0\n  param b mm 1.0 2.0\n'
            f'  param c mm 1.0 2.0\n  port next (0.0 0.0 0.6) (0.0 0.0 0.0)\n}}'
        )
    for i in range(length):
        rules.append(
            f"rule r{i} {{\n  adds u{i + 1}\n  host u{i}.next\n}}"
        )
        constraints.append(f"constraint k{i} count-range u{i + 1} 1 1")
    src = CHAIN_SOURCE_TEMPLATE.format(
        units="\n\n".join(units), rules="\n\n".join(rules), constraints="\n".join(constraints)
    )
    return parse_grammar(src)
