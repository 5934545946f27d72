"""Interpreter tests: legality, application, constraints, and realization."""

import math

import numpy as np
import pytest

from shapeforge.grammar.dsl import parse_grammar
from shapeforge.grammar.engine import (
    apply_rule,
    check_constraints,
    legal_rules,
    realize,
    replay,
)
from shapeforge.grammar.geometry import assembly_to_obj
from shapeforge.grammar.model import (
    DesignSequence,
    GrammarViolation,
    RuleApplication,
)
from shapeforge.grammar.walks import generate_corpus, midpoint_params

FOUR = "4-motor Drone"

# body + one symmetry-1 arm rule and no count caps: lets two arms land on
# the same port angle
OVERLAP_SRC = """
product Overlap
shapetype "t"
unit body cylinder {
  param radius mm 40.0 60.0
  param height mm 20.0 30.0
  port side (0.5 0.0 0.0) (0.0 0.0 0.0)
}
unit fin box {
  param length mm 30.0 60.0
  param width mm 4.0 8.0
  param height mm 4.0 8.0
  center (0.5 0.0 0.0)
  port tip (1.0 0.0 0.0) (0.0 0.0 0.0)
}
axiom body
rule add_fin {
  adds fin
  host body.side
}
constraint solid no-collision
"""


def _empty(drone):
    return DesignSequence(shape_type=FOUR)


def _arm_app(drone, host=0):
    rule = drone.rule("add_quad_arms")
    return RuleApplication("add_quad_arms", host, midpoint_params(rule))


class TestLegalRules:
    def test_empty_sequence_offers_only_axiom_hosted_rules(self, drone):
        legal = legal_rules(drone, _empty(drone))
        assert set(legal) == {
            "add_quad_arms",
            "add_twin_arms",
            "add_camera",
            "add_skids",
            "add_battery",
            "add_antenna",
        }
        for hosts in legal.values():
            assert hosts == [0]

    def test_motor_rule_absent_at_cap(self, drone):
        seq = _empty(drone).extended(_arm_app(drone))
        for arm in (1, 2, 3, 4):
            seq = apply_rule(
                drone, seq, RuleApplication("add_motor", arm, midpoint_params(drone.rule("add_motor")))
            )
        legal = legal_rules(drone, seq)
        assert "add_motor" not in legal
        assert "add_propeller" in legal

    def test_zero_rule_grammar_gives_empty_set(self):
        g = parse_grammar(
            'product P\nshapetype "t"\nunit b box {\n  param a mm 1.0 2.0\n'
            "  param b mm 1.0 2.0\n  param c mm 1.0 2.0\n}\naxiom b\n"
        )
        assert legal_rules(g, DesignSequence(shape_type="t")) == {}

    def test_excludes_blocks_other_style(self, drone):
        seq = _empty(drone).extended(_arm_app(drone))
        assert "add_twin_arms" not in legal_rules(drone, seq)

    def test_soundness_midpoint_params(self, drone):
        """Every (rule, host) in the set admits a midpoint application."""
        rng = np.random.default_rng(3)
        for walk in generate_corpus(drone, 10, seed=11):
            cut = int(rng.integers(0, len(walk.applications)))
            seq = DesignSequence(shape_type=walk.shape_type, applications=walk.applications[:cut])
            legal = legal_rules(drone, seq)
            for rid, hosts in legal.items():
                app = RuleApplication(rid, hosts[0], midpoint_params(drone.rule(rid)))
                apply_rule(drone, seq, app)  # must not raise


class TestApplyRule:
    def test_arm_append_gives_length_one(self, drone):
        seq = apply_rule(drone, _empty(drone), _arm_app(drone))
        assert len(seq) == 1

    def test_param_below_min_rejected(self, drone):
        rule = drone.rule("add_quad_arms")
        bad = RuleApplication("add_quad_arms", 0, (1.0,) + midpoint_params(rule)[1:])
        with pytest.raises(GrammarViolation) as err:
            apply_rule(drone, _empty(drone), bad)
        assert err.value.violation.constraint_id == "param-range"

    def test_fifth_motor_hits_count_range(self, drone):
        seq = _empty(drone).extended(_arm_app(drone))
        mp = midpoint_params(drone.rule("add_motor"))
        for arm in (1, 2, 3, 4):
            seq = apply_rule(drone, seq, RuleApplication("add_motor", arm, mp))
        with pytest.raises(GrammarViolation) as err:
            apply_rule(drone, seq, RuleApplication("add_motor", 1, mp))
        assert err.value.violation.constraint_id == "motors4"

    def test_missing_host_occurrence(self, drone):
        app = RuleApplication("add_motor", 9, midpoint_params(drone.rule("add_motor")))
        with pytest.raises(GrammarViolation) as err:
            apply_rule(drone, _empty(drone), app)
        assert err.value.violation.kind == "host"

    def test_wrong_host_unit(self, drone):
        app = RuleApplication("add_motor", 0, midpoint_params(drone.rule("add_motor")))
        with pytest.raises(GrammarViolation) as err:
            apply_rule(drone, _empty(drone), app)
        assert "expects host unit" in err.value.violation.message

    def test_integer_param_must_be_integral(self):
        src = (
            'product P\nshapetype "t"\n'
            "unit b box {\n  param a mm 1.0 2.0\n  param b mm 1.0 2.0\n  param c mm 1.0 2.0\n"
            "  port p (0.0 0.0 0.5) (0.0 0.0 0.0)\n}\n"
            "unit s sphere {\n  param r mm 1.0 2.0\n  port q (0.0 0.0 1.0) (0.0 0.0 0.0)\n}\n"
            "axiom b\n"
            "rule add {\n  adds s\n  host b.p\n  param n count 1 4 int\n}\n"
        )
        g = parse_grammar(src)
        seq = DesignSequence(shape_type="t")
        apply_rule(g, seq, RuleApplication("add", 0, (2.0,)))
        with pytest.raises(GrammarViolation):
            apply_rule(g, seq, RuleApplication("add", 0, (2.5,)))

    def test_monotonicity_prefix_stays_clean(self, drone):
        """apply_rule acceptance implies prefix-checkable constraints hold."""
        for walk in generate_corpus(drone, 5, seed=13):
            seq = _empty(drone) if walk.shape_type == FOUR else DesignSequence(shape_type=walk.shape_type)
            for app in walk.applications:
                seq = apply_rule(drone, seq, app)
                final = check_constraints(drone, seq)
                # only whole-solution kinds may be pending on a prefix
                assert all(v.kind in ("count-range", "requires") for v in final)


class TestRealize:
    def test_axiom_only_single_occurrence_at_origin(self, drone):
        asm = realize(drone, _empty(drone))
        assert len(asm.occurrences) == 1
        assert np.allclose(asm.occurrences[0].frame.translation, 0.0)

    def test_quad_arms_at_90_degree_steps(self, drone):
        seq = apply_rule(drone, _empty(drone), _arm_app(drone))
        asm = realize(drone, seq)
        assert len(asm.occurrences) == 5
        body_r = asm.occurrences[0].size_values[0]
        # hand-computed: arm k roots at R(k*90deg) @ (body_r, 0, 0)
        for k, occ in enumerate(asm.occurrences[1:]):
            angle = math.radians(90.0 * k)
            expected = np.array(
                [body_r * math.cos(angle), body_r * math.sin(angle), 0.0]
            )
            assert np.allclose(occ.frame.translation, expected, atol=1e-9), k

    def test_replay_determinism_bit_identical(self, drone, drone_corpus):
        s = drone_corpus[0]
        a1, a2 = realize(drone, s), realize(drone, s)
        for o1, o2 in zip(a1.occurrences, a2.occurrences):
            assert np.array_equal(o1.frame.translation, o2.frame.translation)
            assert np.array_equal(o1.frame.rotation, o2.frame.rotation)
            assert o1.size_values == o2.size_values

    def test_overlap_realizes_but_check_reports(self):
        g = parse_grammar(OVERLAP_SRC)
        seq = DesignSequence(shape_type="t")
        mp = midpoint_params(g.rule("add_fin"))
        seq = apply_rule(g, seq, RuleApplication("add_fin", 0, mp))
        seq = apply_rule(g, seq, RuleApplication("add_fin", 0, mp))  # same angle
        asm = realize(g, seq)  # realize itself succeeds
        assert len(asm.occurrences) == 3
        violations = check_constraints(g, seq)
        assert any(v.kind == "no-collision" for v in violations)

    def test_mass_proxy_is_volume_sum(self, drone):
        asm = realize(drone, _empty(drone))
        r, h = asm.occurrences[0].size_values
        assert asm.total_mass_proxy == pytest.approx(math.pi * r * r * h)

    def test_obj_export_has_all_occurrences(self, drone, drone_corpus):
        asm = realize(drone, drone_corpus[0])
        obj = assembly_to_obj(drone, asm)
        assert obj.count("\no ") == len(asm.occurrences)
        assert obj.startswith("#")


class TestCheckConstraints:
    def test_valid_complete_drone_is_clean(self, drone, drone_corpus):
        assert check_constraints(drone, drone_corpus[0]) == []

    def test_three_motors_under_exact_four(self, drone):
        seq = _empty(drone).extended(_arm_app(drone))
        mp = midpoint_params(drone.rule("add_motor"))
        for arm in (1, 2, 3):
            seq = apply_rule(drone, seq, RuleApplication("add_motor", arm, mp))
        violations = check_constraints(drone, seq)
        ids = {v.constraint_id for v in violations}
        assert "motors4" in ids

    def test_requires_violation_reported(self, drone):
        seq = _empty(drone).extended(_arm_app(drone))
        mp = midpoint_params(drone.rule("add_motor"))
        for arm in (1, 2, 3, 4):
            seq = apply_rule(drone, seq, RuleApplication("add_motor", arm, mp))
        ids = {v.constraint_id for v in check_constraints(drone, seq)}
        assert "powered_props" in ids  # motors demand propellers

    def test_invalid_sequence_raises(self, drone):
        seq = DesignSequence(
            shape_type=FOUR,
            applications=(RuleApplication("add_motor", 5, (12.0, 27.5)),),
        )
        with pytest.raises(GrammarViolation):
            check_constraints(drone, seq)


class TestWalks:
    def test_corpus_all_valid(self, drone, drone_corpus):
        for s in drone_corpus[:50]:
            assert check_constraints(drone, s) == []

    def test_corpus_reproducible(self, drone):
        a = generate_corpus(drone, 10, seed=42)
        b = generate_corpus(drone, 10, seed=42)
        assert a == b

    def test_types_alternate(self, drone, drone_corpus):
        assert {s.shape_type for s in drone_corpus[:2]} == set(drone.shape_types)
