"""Embedding, decoding, snapping, and dataset-format tests."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from shapeforge.grammar.engine import apply_rule
from shapeforge.grammar.model import DesignSequence, RuleApplication
from shapeforge.grammar.walks import midpoint_params
from shapeforge.vecspace import (
    EmbeddedSequence,
    EmbeddingError,
    SnapFailure,
    SpaceConfig,
    decode_row,
    dumps_record,
    embed_sequence,
    read_dataset,
    snap_sequence,
    solution_node,
    write_dataset,
)

FOUR = "4-motor Drone"


@pytest.fixture(scope="module")
def space(drone):
    return SpaceConfig.for_grammar(drone)


def demo_drone(drone):
    """The canonical 11-application demo drone (quad arms, motors, props,
    camera, skids)."""
    seq = DesignSequence(shape_type=FOUR)
    seq = apply_rule(drone, seq, RuleApplication("add_quad_arms", 0, midpoint_params(drone.rule("add_quad_arms"))))
    for arm in (1, 2, 3, 4):
        seq = apply_rule(drone, seq, RuleApplication("add_motor", arm, midpoint_params(drone.rule("add_motor"))))
    for motor in (5, 6, 7, 8):
        seq = apply_rule(drone, seq, RuleApplication("add_propeller", motor, midpoint_params(drone.rule("add_propeller"))))
    seq = apply_rule(drone, seq, RuleApplication("add_camera", 0, midpoint_params(drone.rule("add_camera"))))
    seq = apply_rule(drone, seq, RuleApplication("add_skids", 0, midpoint_params(drone.rule("add_skids"))))
    return seq


class TestSpaceConfig:
    def test_row_width(self, drone, space):
        assert space.rule_vocab_size == len(drone.rules)
        assert space.row_width == len(drone.rules) + drone.max_rule_arity + 1

    def test_round_trips_through_dict(self, space):
        assert SpaceConfig.from_dict(space.to_dict()) == space


class TestEmbed:
    def test_empty_sequence_all_zero(self, drone, space):
        e = embed_sequence(drone, space, DesignSequence(shape_type=FOUR))
        assert not e.matrix.any()
        assert e.host_indices == (-1,) * space.max_rules
        assert list(e.label_onehot(drone)) == [1.0, 0.0]

    def test_param_at_min_encodes_zero(self, drone, space):
        rule = drone.rule("add_camera")
        app = RuleApplication("add_camera", 0, (rule.params[0].min,))
        e = embed_sequence(drone, space, DesignSequence(shape_type=FOUR, applications=(app,)))
        assert e.matrix[0, space.rule_vocab_size] == 0.0
        assert e.matrix[0, space.mask_col] == 1.0

    def test_demo_drone_occupies_first_11_rows(self, drone, space):
        e = embed_sequence(drone, space, demo_drone(drone))
        assert e.occupied_rows() == 11
        assert np.array_equal(e.matrix[:11, space.mask_col], np.ones(11))
        assert not e.matrix[11:].any()

    def test_entries_stay_in_unit_interval(self, drone, space, drone_corpus):
        for s in drone_corpus[:50]:
            m = embed_sequence(drone, space, s).matrix
            assert m.min() >= 0.0 and m.max() <= 1.0

    def test_too_long_sequence_rejected(self, drone):
        tiny = SpaceConfig(max_rules=2, rule_vocab_size=len(drone.rules), max_params=3)
        with pytest.raises(EmbeddingError):
            embed_sequence(drone, tiny, demo_drone(drone))


class TestDecodeRow:
    def test_exact_onehot_row_inverts(self, drone, space):
        rule = drone.rule("add_motor")
        app = RuleApplication("add_motor", 1, (12.0, 27.5))
        e = embed_sequence(
            drone,
            space,
            DesignSequence(
                shape_type=FOUR,
                applications=(
                    RuleApplication("add_quad_arms", 0, midpoint_params(drone.rule("add_quad_arms"))),
                    app,
                ),
            ),
        )
        back = decode_row(drone, space, e.matrix[1], host_index=1)
        assert back == app

    def test_noisy_rule_block_uses_argmax(self, drone, space):
        row = np.zeros(space.row_width)
        row[0], row[1] = 0.7, 0.2
        row[-1] = 1.0
        app = decode_row(drone, space, row, host_index=0)
        assert app.rule_id == drone.rules[0].id

    def test_out_of_range_param_clamps(self, drone, space):
        row = np.zeros(space.row_width)
        row[drone.rule_index("add_camera")] = 1.0
        row[space.rule_vocab_size] = 1.3
        app = decode_row(drone, space, row, host_index=0)
        assert app.param_values[0] == drone.rule("add_camera").params[0].max

    @given(st.integers(0, 10**6))
    def test_total_on_random_rows(self, drone, space, seed):
        rng = np.random.default_rng(seed)
        row = rng.uniform(-2, 3, size=space.row_width)
        app = decode_row(drone, space, row, host_index=0)
        rule = drone.rule(app.rule_id)
        assert len(app.param_values) == rule.arity
        for spec, v in zip(rule.params, app.param_values):
            assert spec.min <= v <= spec.max


class TestSnap:
    def test_fixed_point_on_valid_embedding(self, drone, space, drone_corpus):
        for s in drone_corpus[:100]:
            assert snap_sequence(drone, space, embed_sequence(drone, space, s)) == s

    def test_illegal_argmax_falls_to_second_choice(self, drone, space):
        # row claims add_motor (illegal on the empty prefix: no arms) with
        # add_quad_arms as runner-up
        row = np.zeros(space.row_width)
        row[drone.rule_index("add_motor")] = 0.9
        row[drone.rule_index("add_quad_arms")] = 0.6
        row[space.rule_vocab_size : space.rule_vocab_size + 3] = 0.5
        row[space.mask_col] = 1.0
        mat = np.zeros((space.max_rules, space.row_width))
        mat[0] = row
        e = EmbeddedSequence(matrix=mat, label=FOUR, host_indices=(-1,) * space.max_rules)
        out = snap_sequence(drone, space, e)
        assert not isinstance(out, SnapFailure)
        assert out.applications[0].rule_id == "add_quad_arms"

    def test_snap_failure_when_nothing_legal(self, drone, space):
        # all 32 rows occupied exceeds the grammar's total application
        # capacity (17 for a 4-motor drone), so snapping must fail partway
        mat = np.zeros((space.max_rules, space.row_width))
        mat[:, space.mask_col] = 1.0
        mat[:, drone.rule_index("add_camera")] = 1.0
        e = EmbeddedSequence(matrix=mat, label=FOUR, host_indices=(-1,) * space.max_rules)
        out = snap_sequence(drone, space, e)
        assert isinstance(out, SnapFailure)
        assert out.row == 17

    def test_snap_failure_at_row_zero(self):
        from conftest import chain_grammar
        from shapeforge.vecspace import SpaceConfig as SC

        g = chain_grammar(2)
        space = SC.for_grammar(g, max_rules=8)
        mat = np.zeros((space.max_rules, space.row_width))
        mat[:3, space.mask_col] = 1.0  # chain of 2 absorbs at most 2 rows
        e = EmbeddedSequence(matrix=mat, label="chain", host_indices=(-1,) * 8)
        out = snap_sequence(g, space, e)
        assert isinstance(out, SnapFailure)
        assert out.row == 2

    def test_embedded_hosts_win_when_admissible(self, drone, space, drone_corpus):
        s = drone_corpus[0]
        e = embed_sequence(drone, space, s)
        out = snap_sequence(drone, space, e)
        assert [a.host_occurrence for a in out.applications] == [
            a.host_occurrence for a in s.applications
        ]


class TestSolutionNode:
    def test_empty_embedding_is_origin(self, drone, space):
        e = embed_sequence(drone, space, DesignSequence(shape_type=FOUR))
        assert not solution_node(e).any()

    def test_single_row_is_that_row(self, drone, space):
        app = RuleApplication("add_camera", 0, (11.5,))
        e = embed_sequence(drone, space, DesignSequence(shape_type=FOUR, applications=(app,)))
        assert np.array_equal(solution_node(e), e.matrix[0])

    def test_row_permutation_invariant(self, drone, space, drone_corpus):
        e = embed_sequence(drone, space, drone_corpus[0])
        n = e.occupied_rows()
        shuffled = e.matrix.copy()
        shuffled[: n] = shuffled[: n][::-1]
        e2 = EmbeddedSequence(matrix=shuffled, label=e.label, host_indices=e.host_indices)
        assert np.allclose(solution_node(e), solution_node(e2))

    def test_additive_over_concatenation(self, drone, space, drone_corpus):
        e1 = embed_sequence(drone, space, drone_corpus[0])
        e2 = embed_sequence(drone, space, drone_corpus[2])
        n1, n2 = e1.occupied_rows(), e2.occupied_rows()
        merged = np.zeros_like(e1.matrix)
        merged[:n1] = e1.matrix[:n1]
        merged[n1 : n1 + n2] = e2.matrix[:n2]
        em = EmbeddedSequence(matrix=merged, label=e1.label, host_indices=e1.host_indices)
        assert np.allclose(solution_node(em), solution_node(e1) + solution_node(e2))


class TestDatasetFormat:
    def test_write_read_round_trip(self, drone, space, drone_corpus, tmp_path):
        records = [embed_sequence(drone, space, s) for s in drone_corpus[:10]]
        path = tmp_path / "data.jsonl"
        assert write_dataset(path, records) == 10
        back = read_dataset(path)
        for a, b in zip(records, back):
            assert np.array_equal(a.matrix, b.matrix)
            assert a.label == b.label and a.host_indices == b.host_indices

    def test_byte_stable_output(self, drone, space, drone_corpus, tmp_path):
        records = [embed_sequence(drone, space, s) for s in drone_corpus[:5]]
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_dataset(p1, records)
        write_dataset(p2, records)
        assert p1.read_bytes() == p2.read_bytes()

    def test_record_line_is_compact_json(self, drone, space, drone_corpus):
        rec = embed_sequence(drone, space, drone_corpus[0])
        line = dumps_record(rec)
        assert "\n" not in line and line.startswith("{")
