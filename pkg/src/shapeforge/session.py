"""Multi-designer design-session management over an event-sourced task log.

The collaboration roles (task publication, submission validation, progress
tracking, solution collection, contribution estimation) are message handlers
over one append-only event log per task. Every submission is validated
against the grammar before acceptance; rejections stay in the log with the
violation that caused them but never mutate a design sequence. Replaying the
accepted events of a log reproduces task state exactly, and the store
re-verifies this whenever it loads a task from disk.

Branching keeps stranger collaboration conflict-free: appends extend a
branch in place, but replacing a region that contains someone else's work
forks a new branch seeded with the edit, leaving the original intact.

Writes to one task are serialized by a per-task lock; events are flushed
and fsynced before a submission is acknowledged, so a crash after an
acknowledgment never loses the event.
"""

from __future__ import annotations

import json
import os
import threading
import time
from dataclasses import dataclass, field, replace as dc_replace
from pathlib import Path
from typing import Callable, Optional

from .grammar.dsl import parse_grammar
from .grammar.engine import check_constraints, replay, step
from .grammar.fixtures import drone_grammar_source
from .grammar.model import (
    DesignSequence,
    Grammar,
    GrammarViolation,
    RuleApplication,
    Violation,
)
from .grammar.validate import validate_grammar

MAIN_BRANCH = "main"

APPEND = "append-rules"
REPLACE = "replace-from-index"
FINALIZE = "finalize"
CLOSE = "close-task"

ACCEPTED = "accepted"
REJECTED = "rejected"


class SessionError(Exception):
    pass


class UnknownTask(SessionError):
    pass


@dataclass(frozen=True)
class Task:
    id: str
    product_kind: str
    grammar_ref: str
    shape_type: str
    description: str
    created_by: str
    status: str = "open"

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "productKind": self.product_kind,
            "grammarRef": self.grammar_ref,
            "shapeType": self.shape_type,
            "description": self.description,
            "createdBy": self.created_by,
            "status": self.status,
        }

    @staticmethod
    def from_dict(d: dict) -> "Task":
        return Task(
            id=d["id"],
            product_kind=d["productKind"],
            grammar_ref=d["grammarRef"],
            shape_type=d["shapeType"],
            description=d["description"],
            created_by=d["createdBy"],
            status=d.get("status", "open"),
        )


@dataclass(frozen=True)
class SubmissionEvent:
    seq: int
    task_id: str
    designer_id: str
    kind: str
    branch: str
    payload: dict
    timestamp: float
    outcome: str
    violation: Optional[Violation] = None
    result_branch: Optional[str] = None  # branch written (fork target on forks)

    def to_dict(self) -> dict:
        d = {
            "seq": self.seq,
            "taskId": self.task_id,
            "designerId": self.designer_id,
            "kind": self.kind,
            "branch": self.branch,
            "payload": self.payload,
            "timestamp": self.timestamp,
            "outcome": self.outcome,
        }
        if self.violation is not None:
            d["violation"] = self.violation.to_dict()
        if self.result_branch is not None:
            d["resultBranch"] = self.result_branch
        return d

    @staticmethod
    def from_dict(d: dict) -> "SubmissionEvent":
        v = d.get("violation")
        return SubmissionEvent(
            seq=int(d["seq"]),
            task_id=d["taskId"],
            designer_id=d["designerId"],
            kind=d["kind"],
            branch=d["branch"],
            payload=d["payload"],
            timestamp=float(d["timestamp"]),
            outcome=d["outcome"],
            violation=Violation(v["constraintId"], v["kind"], v["message"]) if v else None,
            result_branch=d.get("resultBranch"),
        )


@dataclass
class Branch:
    name: str
    sequence: DesignSequence
    finalized: bool = False


@dataclass
class TaskState:
    """In-memory fold of one task's accepted events."""

    task: Task
    branches: dict[str, Branch] = field(default_factory=dict)
    events: list[SubmissionEvent] = field(default_factory=list)
    fork_counter: int = 0

    def branch(self, name: str) -> Branch:
        if name not in self.branches:
            raise SessionError(f"unknown branch {name!r}")
        return self.branches[name]


@dataclass(frozen=True)
class ProcessLog:
    """Immutable progress snapshot."""

    task: Task
    events: tuple[SubmissionEvent, ...]
    sequences: dict  # branch -> DesignSequence
    finalized: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "task": self.task.to_dict(),
            "events": [e.to_dict() for e in self.events],
            "branches": {b: s.to_dict() for b, s in self.sequences.items()},
            "finalized": list(self.finalized),
        }


@dataclass(frozen=True)
class ContributionReport:
    task_id: str
    solution: str  # branch name
    shares: dict  # designer -> share in [0, 1]

    def to_dict(self) -> dict:
        return {"taskId": self.task_id, "solution": self.solution, "shares": dict(self.shares)}


def _apply_payload(
    g: Grammar, state: TaskState, event: SubmissionEvent
) -> tuple[Optional[Violation], Optional[str]]:
    """Fold one event into the state; returns (violation, result_branch)."""
    kind, branch_name = event.kind, event.branch
    designer = event.designer_id

    if kind == CLOSE:
        if designer != state.task.created_by:
            return Violation("publisher-only", "authorization", "only the publisher closes a task"), None
        state.task = dc_replace(state.task, status="closed")
        return None, None

    if state.task.status != "open":
        return Violation("task-closed", "task-closed", "task is closed"), None

    if branch_name not in state.branches:
        return Violation("unknown-branch", "branch", f"unknown branch {branch_name!r}"), None
    branch = state.branches[branch_name]
    if branch.finalized and kind != FINALIZE:
        return Violation("finalized", "branch", f"branch {branch_name!r} is finalized"), None

    if kind == FINALIZE:
        if branch.finalized:
            return Violation("finalized", "branch", "branch already finalized"), None
        if not branch.sequence.applications:
            return Violation("empty-solution", "finalize", "cannot finalize an empty solution"), None
        violations = check_constraints(g, branch.sequence)
        if violations:
            return violations[0], None
        branch.finalized = True
        return None, branch_name

    apps = [RuleApplication.from_dict(a) for a in event.payload.get("applications", [])]

    if kind == APPEND:
        seq = branch.sequence
        try:
            st = replay(g, seq)
            for app in apps:
                st = step(st, app)
                seq = seq.extended(app, author=designer)
        except GrammarViolation as exc:
            return exc.violation, None
        branch.sequence = seq
        return None, branch_name

    if kind == REPLACE:
        index = int(event.payload.get("index", 0))
        old = branch.sequence
        if not (0 <= index <= len(old.applications)):
            return Violation("bad-index", "replace", f"index {index} out of range"), None
        tags = old.author_tags or (None,) * len(old.applications)
        seq = DesignSequence(
            shape_type=old.shape_type,
            applications=old.applications[:index],
            author_tags=tags[:index],
        )
        try:
            st = replay(g, seq)
            for app in apps:
                st = step(st, app)
                seq = seq.extended(app, author=designer)
        except GrammarViolation as exc:
            return exc.violation, None
        replaced_tags = set(tags[index:])
        foreign = any(t is not None and t != designer for t in replaced_tags)
        if foreign:
            state.fork_counter += 1
            fork_name = f"{branch_name}~{state.fork_counter}"
            state.branches[fork_name] = Branch(name=fork_name, sequence=seq)
            return None, fork_name
        branch.sequence = seq
        return None, branch_name

    return Violation("unknown-kind", "submit", f"unknown submission kind {kind!r}"), None


class SessionStore:
    """Persistent task registry with grammar references and event logs."""

    def __init__(
        self,
        data_dir,
        clock: Callable[[], float] = time.time,
    ):
        self.data_dir = Path(data_dir)
        self.clock = clock
        (self.data_dir / "grammars").mkdir(parents=True, exist_ok=True)
        (self.data_dir / "tasks").mkdir(parents=True, exist_ok=True)
        self._grammars: dict[str, Grammar] = {}
        self._tasks: dict[str, TaskState] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._global_lock = threading.Lock()
        self.register_grammar("drone", drone_grammar_source(), persist=False)
        self._load_existing()

    # -- grammar registry ---------------------------------------------------

    def register_grammar(self, name: str, source: str, persist: bool = True) -> Grammar:
        g = parse_grammar(source)
        issues = validate_grammar(g)
        if issues:
            raise SessionError(
                "grammar has validation issues: " + "; ".join(str(i) for i in issues)
            )
        self._grammars[name] = g
        if persist:
            path = self.data_dir / "grammars" / f"{name}.sg"
            path.write_text(source, encoding="utf-8")
        return g

    def grammar(self, ref: str) -> Grammar:
        if ref not in self._grammars:
            raise SessionError(f"unknown grammar {ref!r}")
        return self._grammars[ref]

    def grammar_refs(self) -> list[str]:
        return sorted(self._grammars)

    # -- persistence --------------------------------------------------------

    def _task_dir(self, task_id: str) -> Path:
        return self.data_dir / "tasks" / task_id

    def _load_existing(self) -> None:
        for name in sorted(p.name for p in (self.data_dir / "grammars").glob("*.sg")):
            ref = name[: -len(".sg")]
            if ref not in self._grammars:
                self.register_grammar(
                    ref, (self.data_dir / "grammars" / name).read_text(), persist=False
                )
        for meta_path in sorted((self.data_dir / "tasks").glob("*/meta.json")):
            task = Task.from_dict(json.loads(meta_path.read_text()))
            state = TaskState(task=task)
            state.branches[MAIN_BRANCH] = Branch(
                name=MAIN_BRANCH,
                sequence=DesignSequence(shape_type=task.shape_type),
            )
            g = self.grammar(task.grammar_ref)
            events_path = meta_path.parent / "events.jsonl"
            if events_path.exists():
                with open(events_path, "r", encoding="utf-8") as fh:
                    for line in fh:
                        line = line.strip()
                        if not line:
                            continue
                        event = SubmissionEvent.from_dict(json.loads(line))
                        state.events.append(event)
                        if event.outcome == ACCEPTED:
                            violation, result = _apply_payload(g, state, event)
                            if violation is not None or result != event.result_branch:
                                raise SessionError(
                                    f"replay mismatch for task {task.id} event {event.seq}"
                                )
            self._verify_snapshot(state)
            self._tasks[task.id] = state
            self._locks[task.id] = threading.Lock()

    def _persist_meta(self, state: TaskState) -> None:
        d = self._task_dir(state.task.id)
        d.mkdir(parents=True, exist_ok=True)
        (d / "meta.json").write_text(json.dumps(state.task.to_dict(), sort_keys=True))

    def _persist_snapshot(self, state: TaskState) -> None:
        doc = {
            "eventCount": len(state.events),
            "forkCounter": state.fork_counter,
            "branches": {
                name: {"sequence": b.sequence.to_dict(), "finalized": b.finalized}
                for name, b in sorted(state.branches.items())
            },
        }
        (self._task_dir(state.task.id) / "snapshot.json").write_text(
            json.dumps(doc, sort_keys=True)
        )

    def _verify_snapshot(self, state: TaskState) -> None:
        path = self._task_dir(state.task.id) / "snapshot.json"
        if not path.exists():
            return
        doc = json.loads(path.read_text())
        if doc.get("eventCount", -1) > len(state.events):
            raise SessionError(
                f"task {state.task.id}: snapshot is ahead of the event log "
                f"({doc['eventCount']} > {len(state.events)})"
            )
        if doc.get("eventCount") != len(state.events):
            return  # stale snapshot (crash between append and snapshot): replay wins
        for name, entry in doc.get("branches", {}).items():
            branch = state.branches.get(name)
            if branch is None or branch.sequence.to_dict() != entry["sequence"]:
                raise SessionError(
                    f"task {state.task.id}: snapshot/replay mismatch on branch {name!r}"
                )

    def _append_event(self, event: SubmissionEvent) -> None:
        path = self._task_dir(event.task_id) / "events.jsonl"
        with open(path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event.to_dict(), sort_keys=True))
            fh.write("\n")
            fh.flush()
            os.fsync(fh.fileno())

    # -- operations ----------------------------------------------------------

    def publish_task(
        self, publisher: str, grammar_ref: str, shape_type: str, description: str
    ) -> Task:
        g = self.grammar(grammar_ref)
        issues = validate_grammar(g)
        if issues:
            raise SessionError(
                "grammar has validation issues: " + "; ".join(str(i) for i in issues)
            )
        if shape_type not in g.shape_types:
            raise SessionError(
                f"unknown shape type {shape_type!r}; grammar offers {list(g.shape_types)}"
            )
        with self._global_lock:
            task_id = f"T{len(self._tasks) + 1:04d}"
            task = Task(
                id=task_id,
                product_kind=g.product_kind,
                grammar_ref=grammar_ref,
                shape_type=shape_type,
                description=description,
                created_by=publisher,
            )
            state = TaskState(task=task)
            state.branches[MAIN_BRANCH] = Branch(
                name=MAIN_BRANCH, sequence=DesignSequence(shape_type=shape_type)
            )
            self._tasks[task_id] = state
            self._locks[task_id] = threading.Lock()
            self._persist_meta(state)
        return task

    def _state(self, task_id: str) -> TaskState:
        if task_id not in self._tasks:
            raise UnknownTask(f"unknown task {task_id!r}")
        return self._tasks[task_id]

    def task(self, task_id: str) -> Task:
        return self._state(task_id).task

    def task_ids(self) -> list[str]:
        return sorted(self._tasks)

    def submit(
        self,
        task_id: str,
        designer: str,
        kind: str,
        applications: Optional[list[RuleApplication]] = None,
        branch: str = MAIN_BRANCH,
        index: int = 0,
    ) -> SubmissionEvent:
        """Validate and log one submission; the event reports the outcome."""
        state = self._state(task_id)
        g = self.grammar(state.task.grammar_ref)
        payload: dict = {}
        if applications:
            payload["applications"] = [a.to_dict() for a in applications]
        if kind == REPLACE:
            payload["index"] = index
        with self._locks[task_id]:
            event = SubmissionEvent(
                seq=len(state.events) + 1,
                task_id=task_id,
                designer_id=designer,
                kind=kind,
                branch=branch,
                payload=payload,
                timestamp=float(self.clock()),
                outcome=ACCEPTED,
                violation=None,
                result_branch=None,
            )
            violation, result = _apply_payload(g, state, event)
            if violation is not None:
                event = dc_replace(event, outcome=REJECTED, violation=violation)
            else:
                event = dc_replace(event, result_branch=result)
            state.events.append(event)
            self._persist_meta(state)  # status may have changed (close)
            self._append_event(event)
            self._persist_snapshot(state)
        return event

    def close_task(self, task_id: str, publisher: str) -> SubmissionEvent:
        return self.submit(task_id, publisher, CLOSE)

    def get_progress(self, task_id: str) -> ProcessLog:
        state = self._state(task_id)
        with self._locks[task_id]:
            return ProcessLog(
                task=state.task,
                events=tuple(state.events),
                sequences={name: b.sequence for name, b in state.branches.items()},
                finalized=tuple(sorted(n for n, b in state.branches.items() if b.finalized)),
            )

    def collect_solutions(self, task_id: str) -> dict[str, DesignSequence]:
        state = self._state(task_id)
        with self._locks[task_id]:
            return {
                name: b.sequence
                for name, b in sorted(state.branches.items())
                if b.finalized
            }

    def estimate_contribution(self, task_id: str, solution: str = MAIN_BRANCH) -> ContributionReport:
        state = self._state(task_id)
        with self._locks[task_id]:
            branch = state.branch(solution)
            if not branch.finalized:
                raise SessionError(f"solution {solution!r} is not finalized")
            seq = branch.sequence
            if not seq.applications:
                raise SessionError("empty solution has no contributions")
            tags = seq.author_tags or (None,) * len(seq.applications)
            counts: dict[str, int] = {}
            for t in tags:
                key = t if t is not None else "<unknown>"
                counts[key] = counts.get(key, 0) + 1
            total = len(seq.applications)
            shares = {d: c / total for d, c in sorted(counts.items())}
            return ContributionReport(task_id=task_id, solution=solution, shares=shares)
