"""Parameterized 3D shape grammar: DSL, interpreter, and geometry."""

from .dsl import parse_grammar, serialize_grammar
from .engine import (
    ReplayState,
    apply_rule,
    check_constraints,
    check_state,
    initial_state,
    legal_rules,
    least_loaded_host,
    realize,
    replay,
    step,
)
from .geometry import Assembly, Frame, Occurrence, assembly_to_obj
from .model import (
    Constraint,
    CountRange,
    DesignSequence,
    Excludes,
    Grammar,
    GrammarError,
    GrammarViolation,
    NoCollision,
    ParamRelation,
    ParamSpec,
    Port,
    Requires,
    Rule,
    RuleApplication,
    ShapeUnit,
    Violation,
)
from .validate import Issue, validate_grammar

__all__ = [
    "Assembly",
    "Constraint",
    "CountRange",
    "DesignSequence",
    "Excludes",
    "Frame",
    "Grammar",
    "GrammarError",
    "GrammarViolation",
    "Issue",
    "NoCollision",
    "Occurrence",
    "ParamRelation",
    "ParamSpec",
    "Port",
    "ReplayState",
    "Requires",
    "Rule",
    "RuleApplication",
    "ShapeUnit",
    "Violation",
    "apply_rule",
    "assembly_to_obj",
    "check_constraints",
    "check_state",
    "initial_state",
    "legal_rules",
    "least_loaded_host",
    "parse_grammar",
    "realize",
    "replay",
    "serialize_grammar",
    "step",
    "validate_grammar",
]
