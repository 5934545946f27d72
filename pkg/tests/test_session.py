"""Event-sourced session tests: validation feedback, replay, forks,
contribution shares, persistence, and write concurrency."""

import json
import threading

import pytest

from shapeforge.grammar.fixtures import DRONE_2MOTOR, DRONE_4MOTOR
from shapeforge.grammar.model import RuleApplication
from shapeforge.grammar.walks import generate_corpus, midpoint_params
from shapeforge.session import (
    ACCEPTED,
    APPEND,
    FINALIZE,
    REJECTED,
    REPLACE,
    SessionError,
    SessionStore,
    UnknownTask,
)

FOUR = DRONE_4MOTOR


@pytest.fixture
def store(tmp_path):
    return SessionStore(tmp_path, clock=lambda: 0.0)


@pytest.fixture(scope="module")
def quad_walk(drone):
    return generate_corpus(drone, 1, seed=7, shape_types=[FOUR])[0]


def mp(drone, rule_id):
    return midpoint_params(drone.rule(rule_id))


class TestPublish:
    def test_fixture_grammar_open_task(self, store):
        task = store.publish_task("alice", "drone", FOUR, "quad build")
        assert task.status == "open" and task.product_kind == "Drone"
        assert store.get_progress(task.id).events == ()

    def test_unknown_shape_type_rejected(self, store):
        with pytest.raises(SessionError, match="boat"):
            store.publish_task("alice", "drone", "boat", "x")

    def test_invalid_grammar_rejected_with_issues(self, store):
        bad = (
            'product P\nshapetype "t"\n'
            "unit b box {\n  param a mm 1.0 2.0\n  param b mm 1.0 2.0\n  param c mm 1.0 2.0\n}\n"
            "unit stray box {\n  param a mm 1.0 2.0\n  param b mm 1.0 2.0\n  param c mm 1.0 2.0\n}\n"
            "axiom b\n"
        )
        with pytest.raises(SessionError, match="no attachment ports"):
            store.register_grammar("bad", bad)

    def test_unknown_grammar_ref(self, store):
        with pytest.raises(SessionError, match="unknown grammar"):
            store.publish_task("alice", "ghost", FOUR, "x")

    def test_sequential_task_ids(self, store):
        a = store.publish_task("alice", "drone", FOUR, "1")
        b = store.publish_task("alice", "drone", DRONE_2MOTOR, "2")
        assert (a.id, b.id) == ("T0001", "T0002")


class TestSubmit:
    def test_valid_append_accepted(self, store, drone, quad_walk):
        task = store.publish_task("alice", "drone", FOUR, "x")
        event = store.submit(task.id, "bob", APPEND, [quad_walk.applications[0]])
        assert event.outcome == ACCEPTED
        assert len(store.get_progress(task.id).sequences["main"]) == 1

    def test_out_of_range_param_rejected_verbatim(self, store, drone):
        task = store.publish_task("alice", "drone", FOUR, "x")
        bad = RuleApplication("add_motor", 0, (999.0, 25.0))
        event = store.submit(task.id, "bob", APPEND, [bad])
        assert event.outcome == REJECTED
        assert event.violation.constraint_id in ("param-range", "host-unit")
        assert len(store.get_progress(task.id).sequences["main"]) == 0

    def test_rejection_never_mutates_sequence(self, store, drone, quad_walk):
        task = store.publish_task("alice", "drone", FOUR, "x")
        store.submit(task.id, "bob", APPEND, list(quad_walk.applications[:3]))
        before = store.get_progress(task.id).sequences["main"]
        store.submit(task.id, "bob", APPEND, [RuleApplication("add_motor", 99, (12.0, 27.5))])
        after = store.get_progress(task.id).sequences["main"]
        assert before == after

    def test_alternating_designers_interleave_author_tags(self, store, drone, quad_walk):
        task = store.publish_task("alice", "drone", FOUR, "x")
        names = ["ana", "ben"]
        for i, app in enumerate(quad_walk.applications[:4]):
            store.submit(task.id, names[i % 2], APPEND, [app])
        seq = store.get_progress(task.id).sequences["main"]
        assert list(seq.author_tags) == ["ana", "ben", "ana", "ben"]

    def test_closed_task_rejects_submissions(self, store, drone, quad_walk):
        task = store.publish_task("alice", "drone", FOUR, "x")
        store.close_task(task.id, "alice")
        event = store.submit(task.id, "bob", APPEND, [quad_walk.applications[0]])
        assert event.outcome == REJECTED
        assert event.violation.constraint_id == "task-closed"

    def test_only_publisher_closes(self, store):
        task = store.publish_task("alice", "drone", FOUR, "x")
        event = store.close_task(task.id, "mallory")
        assert event.outcome == REJECTED
        assert store.task(task.id).status == "open"

    def test_unknown_task(self, store):
        with pytest.raises(UnknownTask):
            store.submit("T9999", "bob", APPEND, [])


class TestReplace:
    def test_own_region_replaced_in_place(self, store, drone, quad_walk):
        task = store.publish_task("alice", "drone", FOUR, "x")
        store.submit(task.id, "bob", APPEND, list(quad_walk.applications[:3]))
        event = store.submit(
            task.id, "bob", REPLACE, list(quad_walk.applications[1:4]), index=1
        )
        assert event.outcome == ACCEPTED and event.result_branch == "main"
        seq = store.get_progress(task.id).sequences["main"]
        assert len(seq) == 4

    def test_foreign_region_forks(self, store, drone, quad_walk):
        task = store.publish_task("alice", "drone", FOUR, "x")
        store.submit(task.id, "ana", APPEND, list(quad_walk.applications[:2]))
        event = store.submit(
            task.id, "ben", REPLACE, list(quad_walk.applications[1:3]), index=1
        )
        assert event.outcome == ACCEPTED
        assert event.result_branch == "main~1"
        progress = store.get_progress(task.id)
        assert len(progress.sequences["main"]) == 2  # original untouched
        fork = progress.sequences["main~1"]
        assert len(fork) == 3
        assert list(fork.author_tags) == ["ana", "ben", "ben"]

    def test_replaced_rule_credits_replacer(self, store, drone, quad_walk):
        task = store.publish_task("alice", "drone", FOUR, "x")
        store.submit(task.id, "ana", APPEND, list(quad_walk.applications))
        # ben rewrites the final application: fork credits ben for it
        event = store.submit(
            task.id, "ben", REPLACE, [quad_walk.applications[-1]],
            index=len(quad_walk.applications) - 1,
        )
        fork = store.get_progress(task.id).sequences[event.result_branch]
        assert fork.author_tags[-1] == "ben"

    def test_bad_index_rejected(self, store, drone, quad_walk):
        task = store.publish_task("alice", "drone", FOUR, "x")
        event = store.submit(task.id, "bob", REPLACE, [], index=5)
        assert event.outcome == REJECTED


class TestFinalizeAndCollect:
    def test_no_finalize_no_solutions(self, store, drone, quad_walk):
        task = store.publish_task("alice", "drone", FOUR, "x")
        store.submit(task.id, "bob", APPEND, list(quad_walk.applications))
        assert store.collect_solutions(task.id) == {}

    def test_finalized_valid_solution_collected(self, store, drone, quad_walk):
        task = store.publish_task("alice", "drone", FOUR, "x")
        store.submit(task.id, "bob", APPEND, list(quad_walk.applications))
        event = store.submit(task.id, "bob", FINALIZE)
        assert event.outcome == ACCEPTED
        solutions = store.collect_solutions(task.id)
        assert list(solutions) == ["main"]
        assert solutions["main"].applications == quad_walk.applications

    def test_finalize_on_violating_sequence_rejected(self, store, drone, quad_walk):
        task = store.publish_task("alice", "drone", FOUR, "x")
        store.submit(task.id, "bob", APPEND, list(quad_walk.applications[:2]))
        event = store.submit(task.id, "bob", FINALIZE)
        assert event.outcome == REJECTED
        assert store.collect_solutions(task.id) == {}

    def test_finalize_empty_rejected(self, store):
        task = store.publish_task("alice", "drone", FOUR, "x")
        event = store.submit(task.id, "bob", FINALIZE)
        assert event.outcome == REJECTED
        assert event.violation.constraint_id == "empty-solution"

    def test_finalized_branch_immutable(self, store, drone, quad_walk):
        task = store.publish_task("alice", "drone", FOUR, "x")
        store.submit(task.id, "bob", APPEND, list(quad_walk.applications))
        store.submit(task.id, "bob", FINALIZE)
        event = store.submit(task.id, "bob", APPEND, [quad_walk.applications[0]])
        assert event.outcome == REJECTED


class TestContribution:
    def test_single_author_full_share(self, store, drone, quad_walk):
        task = store.publish_task("alice", "drone", FOUR, "x")
        store.submit(task.id, "solo", APPEND, list(quad_walk.applications))
        store.submit(task.id, "solo", FINALIZE)
        report = store.estimate_contribution(task.id, "main")
        assert report.shares == {"solo": 1.0}

    def test_six_four_split(self, store, drone):
        """A contributes 6 applications, B contributes 4 -> 0.6 / 0.4."""
        # ten applications: quad arms, 4 motors, 4 propellers, camera
        apps = [RuleApplication("add_quad_arms", 0, mp(drone, "add_quad_arms"))]
        apps += [RuleApplication("add_motor", h, mp(drone, "add_motor")) for h in (1, 2, 3, 4)]
        apps += [RuleApplication("add_propeller", h, mp(drone, "add_propeller")) for h in (5, 6, 7, 8)]
        apps += [RuleApplication("add_camera", 0, mp(drone, "add_camera"))]
        task = store.publish_task("alice", "drone", FOUR, "x")
        store.submit(task.id, "A", APPEND, apps[:6])
        store.submit(task.id, "B", APPEND, apps[6:])
        store.submit(task.id, "A", FINALIZE)
        report = store.estimate_contribution(task.id, "main")
        assert report.shares == {"A": 0.6, "B": 0.4}
        assert sum(report.shares.values()) == pytest.approx(1.0, abs=1e-12)

    def test_unfinalized_solution_rejected(self, store, drone, quad_walk):
        task = store.publish_task("alice", "drone", FOUR, "x")
        store.submit(task.id, "bob", APPEND, list(quad_walk.applications))
        with pytest.raises(SessionError, match="not finalized"):
            store.estimate_contribution(task.id, "main")

    def test_shares_sum_to_one(self, store, drone, quad_walk):
        task = store.publish_task("alice", "drone", FOUR, "x")
        designers = ["a", "b", "c"]
        for i, app in enumerate(quad_walk.applications):
            store.submit(task.id, designers[i % 3], APPEND, [app])
        store.submit(task.id, "a", FINALIZE)
        report = store.estimate_contribution(task.id, "main")
        assert sum(report.shares.values()) == pytest.approx(1.0, abs=1e-12)


class TestEventSourcing:
    def test_progress_counts_rejections(self, store, drone, quad_walk):
        task = store.publish_task("alice", "drone", FOUR, "x")
        for app in quad_walk.applications[:3]:
            store.submit(task.id, "bob", APPEND, [app])
        store.submit(task.id, "bob", APPEND, [RuleApplication("add_motor", 99, (12.0, 27.5))])
        progress = store.get_progress(task.id)
        assert len(progress.events) == 4
        assert [e.outcome for e in progress.events] == [ACCEPTED] * 3 + [REJECTED]
        assert len(progress.sequences["main"]) == 3

    def test_snapshot_stable_without_writes(self, store, drone, quad_walk):
        task = store.publish_task("alice", "drone", FOUR, "x")
        store.submit(task.id, "bob", APPEND, list(quad_walk.applications[:2]))
        a = store.get_progress(task.id)
        b = store.get_progress(task.id)
        assert a.events == b.events and a.sequences == b.sequences

    def test_reload_replays_identical_state(self, tmp_path, drone, quad_walk):
        store = SessionStore(tmp_path, clock=lambda: 0.0)
        task = store.publish_task("alice", "drone", FOUR, "x")
        store.submit(task.id, "ana", APPEND, list(quad_walk.applications[:4]))
        store.submit(task.id, "ben", REPLACE, list(quad_walk.applications[3:]), index=3)
        store.submit(task.id, "ana", APPEND, [RuleApplication("add_motor", 99, (1.0, 1.0))])
        reloaded = SessionStore(tmp_path, clock=lambda: 0.0)
        a = store.get_progress(task.id)
        b = reloaded.get_progress(task.id)
        assert a.events == b.events
        assert a.sequences == b.sequences
        assert a.finalized == b.finalized

    def test_crash_after_ack_preserves_event(self, tmp_path, drone, quad_walk):
        """The event file is flushed before acknowledgement, so a new store
        instance (simulating a crash and restart) sees the mutation."""
        store = SessionStore(tmp_path, clock=lambda: 0.0)
        task = store.publish_task("alice", "drone", FOUR, "x")
        event = store.submit(task.id, "bob", APPEND, [quad_walk.applications[0]])
        assert event.outcome == ACCEPTED
        # no graceful shutdown: just abandon the instance
        recovered = SessionStore(tmp_path, clock=lambda: 0.0)
        progress = recovered.get_progress(task.id)
        assert len(progress.events) == 1
        assert len(progress.sequences["main"]) == 1

    def test_snapshot_written_and_verified(self, tmp_path, drone, quad_walk):
        store = SessionStore(tmp_path, clock=lambda: 0.0)
        task = store.publish_task("alice", "drone", FOUR, "x")
        store.submit(task.id, "bob", APPEND, list(quad_walk.applications[:2]))
        snap_path = tmp_path / "tasks" / task.id / "snapshot.json"
        assert snap_path.exists()
        doc = json.loads(snap_path.read_text())
        assert doc["eventCount"] == 1
        # a stale snapshot (crash before the snapshot write) is tolerated
        doc["eventCount"] = 0
        snap_path.write_text(json.dumps(doc))
        SessionStore(tmp_path, clock=lambda: 0.0)
        # a current-but-divergent snapshot is an integrity error
        doc["eventCount"] = 1
        doc["branches"]["main"]["sequence"]["applications"] = []
        snap_path.write_text(json.dumps(doc))
        with pytest.raises(SessionError, match="snapshot"):
            SessionStore(tmp_path, clock=lambda: 0.0)

    def test_tampered_log_detected(self, tmp_path, drone, quad_walk):
        store = SessionStore(tmp_path, clock=lambda: 0.0)
        task = store.publish_task("alice", "drone", FOUR, "x")
        store.submit(task.id, "bob", APPEND, [quad_walk.applications[0]])
        log = tmp_path / "tasks" / task.id / "events.jsonl"
        doc = json.loads(log.read_text())
        doc["payload"]["applications"][0]["paramValues"] = [99999.0, 1.0, 1.0]
        log.write_text(json.dumps(doc) + "\n")
        with pytest.raises(SessionError, match="replay mismatch"):
            SessionStore(tmp_path, clock=lambda: 0.0)


class TestConcurrency:
    def test_hundred_concurrent_submits_lose_nothing(self, store, drone, quad_walk):
        task = store.publish_task("alice", "drone", FOUR, "stress")
        first = store.submit(task.id, "seed", APPEND, [quad_walk.applications[0]])
        assert first.outcome == ACCEPTED
        motor = drone.rule("add_motor")
        results = []

        def worker(i):
            # motors only fit on arms 1..4 and cap at 4: a few accepts, many
            # rejects, all must be logged
            app = RuleApplication("add_motor", 1 + (i % 4), midpoint_params(motor))
            results.append(store.submit(task.id, f"d{i}", APPEND, [app]))

        threads = [threading.Thread(target=worker, args=(i,)) for i in range(100)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        progress = store.get_progress(task.id)
        assert len(progress.events) == 101
        accepted = [e for e in progress.events if e.outcome == ACCEPTED]
        assert len(accepted) == 1 + 4  # seed + exactly four motors fit
        assert len(progress.sequences["main"]) == 5
        seqs = {e.seq for e in progress.events}
        assert seqs == set(range(1, 102))
