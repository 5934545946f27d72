"""Value types for parameterized 3D shape grammars.

A grammar defines a product family's design-solution space: shape units with
attachment ports, production rules that add units onto host ports, and
constraints that gate which rule sequences count as valid designs. All types
here are immutable; operations over them live in ``engine`` and ``geometry``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

PRIMITIVES = ("box", "cylinder", "sphere", "extrusion-profile")

# Size-parameter arity each primitive expects (box: x/y/z extents,
# cylinder: radius/height, sphere: radius, extrusion-profile: w/d/h).
PRIMITIVE_ARITY = {
    "box": 3,
    "cylinder": 2,
    "sphere": 1,
    "extrusion-profile": 3,
}

Vec3 = tuple[float, float, float]


@dataclass(frozen=True)
class ParamSpec:
    """A named bounded parameter of a rule or a unit's size."""

    name: str
    unit: str
    min: float
    max: float
    kind: str = "continuous"  # "continuous" | "integer"

    @property
    def span(self) -> float:
        return self.max - self.min

    def midpoint(self) -> float:
        mid = self.min + 0.5 * self.span
        if self.kind == "integer":
            return float(round(mid))
        return mid

    def contains(self, value: float) -> bool:
        if not (self.min <= value <= self.max):
            return False
        if self.kind == "integer" and value != round(value):
            return False
        return True


@dataclass(frozen=True)
class Port:
    """Attachment frame on a unit.

    ``position`` is expressed in size-normalized coordinates: the world offset
    is position * extent, so (0.5, 0, 0) sits on the +x face of the resolved
    primitive. ``orientation`` is an extrinsic XYZ Euler triple in degrees.
    """

    name: str
    position: Vec3
    orientation: Vec3 = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class ShapeUnit:
    """A primitive shape feature with attachment ports.

    ``center`` places the primitive's geometric center relative to the unit
    origin, in the same size-normalized coordinates as port positions; e.g.
    (0.5, 0, 0) makes the unit span [0, extent_x] along local x so it grows
    outward from its attachment point.
    """

    name: str
    primitive: str
    size_params: tuple[ParamSpec, ...]
    ports: tuple[Port, ...] = ()
    center: Vec3 = (0.0, 0.0, 0.0)

    def port(self, name: str) -> Port:
        for p in self.ports:
            if p.name == name:
                return p
        raise KeyError(name)


@dataclass(frozen=True)
class Rule:
    """Adds one unit (replicated ``symmetry`` times) onto a host port."""

    id: str
    adds_unit: str
    host_unit: str
    host_port: str
    params: tuple[ParamSpec, ...] = ()
    symmetry: int = 1

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class CountRange:
    """Total occurrences of ``unit`` must end up within [lo, hi]."""

    id: str
    unit: str
    lo: int
    hi: int
    when: Optional[str] = None  # restrict to one shape type

    kind = "count-range"


@dataclass(frozen=True)
class Requires:
    """If rule ``a`` appears in a solution, rule ``b`` must appear too."""

    id: str
    a: str
    b: str
    when: Optional[str] = None

    kind = "requires"


@dataclass(frozen=True)
class Excludes:
    """Rules ``a`` and ``b`` may not both appear in one solution."""

    id: str
    a: str
    b: str
    when: Optional[str] = None

    kind = "excludes"


@dataclass(frozen=True)
class ParamRelation:
    """Per-application linear inequality over one rule's named params.

    ``terms`` is a sum of coef*param entries; the application must satisfy
    ``sum(coef * value) op rhs`` with op in {>=, <=}.
    """

    id: str
    rule: str
    terms: tuple[tuple[float, str], ...]
    op: str
    rhs: float
    when: Optional[str] = None

    kind = "param-relation"

    def evaluate(self, values: dict[str, float]) -> float:
        return sum(c * values[n] for c, n in self.terms)

    def holds(self, values: dict[str, float]) -> bool:
        lhs = self.evaluate(values)
        return lhs >= self.rhs if self.op == ">=" else lhs <= self.rhs


@dataclass(frozen=True)
class NoCollision:
    """No two occurrence bounding boxes may overlap."""

    id: str
    when: Optional[str] = None

    kind = "no-collision"


Constraint = Union[CountRange, Requires, Excludes, ParamRelation, NoCollision]


@dataclass(frozen=True)
class Grammar:
    """A product family's full design-solution space definition."""

    product_kind: str
    shape_types: tuple[str, ...]
    units: tuple[ShapeUnit, ...]
    rules: tuple[Rule, ...]
    constraints: tuple[Constraint, ...]
    axiom: str

    # derived lookup tables, excluded from equality/repr
    _unit_map: dict = field(init=False, repr=False, compare=False, default_factory=dict)
    _rule_map: dict = field(init=False, repr=False, compare=False, default_factory=dict)
    _rule_index: dict = field(init=False, repr=False, compare=False, default_factory=dict)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_unit_map", {u.name: u for u in self.units})
        object.__setattr__(self, "_rule_map", {r.id: r for r in self.rules})
        object.__setattr__(
            self, "_rule_index", {r.id: i for i, r in enumerate(self.rules)}
        )

    def unit(self, name: str) -> ShapeUnit:
        return self._unit_map[name]

    def has_unit(self, name: str) -> bool:
        return name in self._unit_map

    def rule(self, rule_id: str) -> Rule:
        return self._rule_map[rule_id]

    def has_rule(self, rule_id: str) -> bool:
        return rule_id in self._rule_map

    def rule_index(self, rule_id: str) -> int:
        """Position of a rule in the declaration order (vocabulary index)."""
        return self._rule_index[rule_id]

    @property
    def max_rule_arity(self) -> int:
        return max((r.arity for r in self.rules), default=0)

    def constraints_for(self, shape_type: str) -> tuple[Constraint, ...]:
        """Constraints active for a given shape type."""
        return tuple(
            c for c in self.constraints if c.when is None or c.when == shape_type
        )


@dataclass(frozen=True)
class RuleApplication:
    """One grammar rule instantiated with bound parameter values."""

    rule_id: str
    host_occurrence: int
    param_values: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "ruleId": self.rule_id,
            "hostOccurrence": self.host_occurrence,
            "paramValues": list(self.param_values),
        }

    @staticmethod
    def from_dict(d: dict) -> "RuleApplication":
        return RuleApplication(
            rule_id=d["ruleId"],
            host_occurrence=int(d["hostOccurrence"]),
            param_values=tuple(float(v) for v in d.get("paramValues", ())),
        )


@dataclass(frozen=True)
class DesignSequence:
    """An ordered list of rule applications: one node in the solution space."""

    shape_type: str
    applications: tuple[RuleApplication, ...] = ()
    author_tags: tuple[Optional[str], ...] = ()

    def __post_init__(self) -> None:
        if self.author_tags and len(self.author_tags) != len(self.applications):
            raise ValueError("author_tags length must match applications")

    def __len__(self) -> int:
        return len(self.applications)

    def extended(
        self, app: RuleApplication, author: Optional[str] = None
    ) -> "DesignSequence":
        tags = self.author_tags if self.author_tags else (None,) * len(self.applications)
        return DesignSequence(
            shape_type=self.shape_type,
            applications=self.applications + (app,),
            author_tags=tags + (author,),
        )

    def to_dict(self) -> dict:
        d = {
            "shapeType": self.shape_type,
            "applications": [a.to_dict() for a in self.applications],
        }
        if self.author_tags:
            d["authorTags"] = list(self.author_tags)
        return d

    @staticmethod
    def from_dict(d: dict) -> "DesignSequence":
        return DesignSequence(
            shape_type=d["shapeType"],
            applications=tuple(
                RuleApplication.from_dict(a) for a in d.get("applications", ())
            ),
            author_tags=tuple(d.get("authorTags", ())),
        )


@dataclass(frozen=True)
class Violation:
    """One constraint failure, in the form surfaced to designers."""

    constraint_id: str
    kind: str
    message: str

    def to_dict(self) -> dict:
        return {
            "constraintId": self.constraint_id,
            "kind": self.kind,
            "message": self.message,
        }


class GrammarViolation(Exception):
    """Raised when a rule application breaks a prefix-checkable constraint."""

    def __init__(self, violation: Violation):
        super().__init__(f"[{violation.constraint_id}] {violation.message}")
        self.violation = violation


class GrammarError(Exception):
    """Syntax or semantic error in grammar source."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        loc = f" (line {line}" + (f", col {column})" if column is not None else ")") if line else ""
        super().__init__(message + loc)
        self.message = message
        self.line = line
        self.column = column
