"""Parser, serializer, and validator tests."""

import pytest
from hypothesis import given, strategies as st

from shapeforge.grammar.dsl import parse_grammar, serialize_grammar
from shapeforge.grammar.model import (
    CountRange,
    Excludes,
    Grammar,
    GrammarError,
    ParamSpec,
    Port,
    Rule,
    ShapeUnit,
)
from shapeforge.grammar.validate import validate_grammar

from conftest import random_grammar

MINIMAL = """
product Widget
shapetype "basic"
unit body box {
  param w mm 1.0 2.0
  param d mm 1.0 2.0
  param h mm 1.0 2.0
}
axiom body
"""


class TestParse:
    def test_minimal_grammar(self):
        g = parse_grammar(MINIMAL)
        assert g.product_kind == "Widget"
        assert len(g.units) == 1
        assert len(g.rules) == 0
        assert g.axiom == "body"

    def test_fixture_units_and_labels(self, drone):
        names = {u.name for u in drone.units}
        assert {"body", "arm", "motor", "propeller", "camera", "skid"} <= names
        assert drone.shape_types == ("4-motor Drone", "2-motor Drone")

    def test_undefined_port_is_semantic_error(self):
        src = MINIMAL + """
rule add {
  adds body
  host body.nowhere
}
"""
        with pytest.raises(GrammarError, match="nowhere"):
            parse_grammar(src)

    def test_undefined_unit_in_rule(self):
        src = MINIMAL + "\nrule add {\n  adds ghost\n  host body.p\n}\n"
        with pytest.raises(GrammarError, match="ghost"):
            parse_grammar(src)

    def test_bad_param_range_rejected(self):
        src = MINIMAL.replace("param w mm 1.0 2.0", "param w mm 5.0 2.0")
        with pytest.raises(GrammarError, match="bad range"):
            parse_grammar(src)

    def test_syntax_error_carries_line(self):
        try:
            parse_grammar("product Widget\nshapetype basic-unquoted\n")
        except GrammarError as exc:
            assert exc.line == 2
        else:
            pytest.fail("expected GrammarError")

    def test_duplicate_rule_id_rejected(self, drone):
        src = serialize_grammar(drone)
        block = "rule add_camera {\n  adds camera\n  host body.belly\n}\n"
        with pytest.raises(GrammarError, match="duplicate rule"):
            parse_grammar(src + block)

    def test_missing_axiom(self):
        src = MINIMAL.replace("axiom body", "")
        with pytest.raises(GrammarError, match="axiom"):
            parse_grammar(src)

    def test_comments_and_blank_lines_ignored(self):
        src = "# heading\n\n" + MINIMAL + "\n# trailing\n"
        assert parse_grammar(src).product_kind == "Widget"


class TestRoundTrip:
    def test_fixture_round_trip(self, drone):
        assert parse_grammar(serialize_grammar(drone)) == drone

    @given(st.integers(min_value=0, max_value=10**6))
    def test_random_grammar_round_trip(self, seed):
        g = random_grammar(seed)
        assert parse_grammar(serialize_grammar(g)) == g

    def test_reserialization_is_canonical(self, drone):
        text = serialize_grammar(drone)
        assert serialize_grammar(parse_grammar(text)) == text


def _unit(name="u", ports=(Port("p", (0.0, 0.0, 0.5)),)):
    return ShapeUnit(
        name=name,
        primitive="box",
        size_params=(
            ParamSpec("a", "mm", 1.0, 2.0),
            ParamSpec("b", "mm", 1.0, 2.0),
            ParamSpec("c", "mm", 1.0, 2.0),
        ),
        ports=tuple(ports),
    )


class TestValidate:
    def test_fixture_is_clean(self, drone):
        assert validate_grammar(drone) == []

    def test_count_range_lo_over_hi(self):
        g = Grammar(
            product_kind="W",
            shape_types=("t",),
            units=(_unit(),),
            rules=(),
            constraints=(CountRange(id="c", unit="u", lo=3, hi=1),),
            axiom="u",
        )
        issues = validate_grammar(g)
        assert len(issues) == 1
        assert "lo 3 > hi 1" in issues[0].message

    def test_duplicate_rule_id(self):
        r = Rule(id="r", adds_unit="u", host_unit="u", host_port="p")
        g = Grammar(
            product_kind="W",
            shape_types=("t",),
            units=(_unit(),),
            rules=(r, r),
            constraints=(),
            axiom="u",
        )
        issues = validate_grammar(g)
        assert len(issues) == 1
        assert "duplicate rule id" in issues[0].message

    def test_self_exclusion_flagged(self):
        r = Rule(id="r", adds_unit="u", host_unit="u", host_port="p")
        g = Grammar(
            product_kind="W",
            shape_types=("t",),
            units=(_unit(),),
            rules=(r,),
            constraints=(Excludes(id="c", a="r", b="r"),),
            axiom="u",
        )
        assert any("excludes itself" in i.message for i in validate_grammar(g))

    def test_non_root_unit_without_ports(self):
        g = Grammar(
            product_kind="W",
            shape_types=("t",),
            units=(_unit("root"), _unit("leaf", ports=())),
            rules=(),
            constraints=(),
            axiom="root",
        )
        assert any("no attachment ports" in i.message for i in validate_grammar(g))

    def test_random_grammars_validate_cleanly(self):
        for seed in range(40):
            g = random_grammar(seed)
            assert validate_grammar(g) == [], f"seed {seed}"
