"""HTTP/JSON facade over the design pipeline.

One FastAPI application with three route groups mirroring the pipeline
stages (design-space/session routes, /expand for corpus growth, /complete
for recommendations) plus geometry export for the designer console. All
mutating routes append to the session event log before acknowledging, and
every completion is re-validated against the grammar before it is returned.

Errors use one envelope: {"error": {"code", "message", "violation"?}} with
codes bad_request, not_found, grammar_violation, model_missing, internal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional

import time

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, PlainTextResponse
from pydantic import BaseModel, Field

from ..bayes import CausalMap, SelectPolicy, causal_map_to_bayesnet, select
from ..completer import (
    CompleterConfig,
    PairSampler,
    SequenceSplit,
    TokenVocab,
    complete,
    load_completer,
    save_completer,
    train_completer,
)
from ..gan import GanConfig, load_gan, sample, save_gan, train_gan
from ..grammar.dsl import parse_grammar, serialize_grammar
from ..grammar.engine import check_constraints, legal_rules, realize, replay
from ..grammar.fixtures import drone_criteria_map
from ..grammar.geometry import assembly_to_obj
from ..grammar.model import (
    DesignSequence,
    Grammar,
    GrammarError,
    GrammarViolation,
    RuleApplication,
)
from ..grammar.validate import validate_grammar
from ..session import (
    APPEND,
    FINALIZE,
    MAIN_BRANCH,
    REPLACE,
    SessionError,
    SessionStore,
    UnknownTask,
)
from ..vecspace import SpaceConfig, read_dataset, snap_sequence, write_dataset, SnapFailure


@dataclass(frozen=True)
class ApiConfig:
    data_dir: str
    host: str = "127.0.0.1"
    port: int = 8321
    completer_path: str = "models/completer.json"
    gan_path: str = "models/gan.json"
    cors_origins: tuple[str, ...] = ("*",)
    max_body_bytes: int = 8_000_000


class ApiError(Exception):
    STATUS = {
        "bad_request": 400,
        "not_found": 404,
        "grammar_violation": 409,
        "model_missing": 409,
        "internal": 500,
    }

    def __init__(self, code: str, message: str, violation: Optional[dict] = None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.violation = violation

    def to_response(self) -> JSONResponse:
        body: dict[str, Any] = {"error": {"code": self.code, "message": self.message}}
        if self.violation is not None:
            body["error"]["violation"] = self.violation
        return JSONResponse(status_code=self.STATUS[self.code], content=body)


# -- request schemas ---------------------------------------------------------


class ValidateBody(BaseModel):
    source: str


class LegalRulesBody(BaseModel):
    grammarRef: Optional[str] = None
    taskId: Optional[str] = None
    sequence: Optional[dict] = None


class CreateTaskBody(BaseModel):
    publisher: str
    shapeType: str
    description: str = ""
    grammarRef: Optional[str] = None
    grammar: Optional[str] = None
    grammarName: Optional[str] = None


class SubmitBody(BaseModel):
    designer: str
    kind: str = APPEND
    branch: str = MAIN_BRANCH
    index: int = 0
    applications: list = Field(default_factory=list)


class FinalizeBody(BaseModel):
    designer: str
    branch: str = MAIN_BRANCH


class TrainGanBody(BaseModel):
    dataset: str
    epochs: Optional[int] = None
    seed: int = 7
    out: Optional[str] = None
    grammarRef: str = "drone"


class SampleBody(BaseModel):
    model: Optional[str] = None
    label: str
    n: int
    seed: int = 7
    out: Optional[str] = None


class SelectBody(BaseModel):
    dataset: str
    grammarRef: str = "drone"
    threshold: Optional[float] = None
    topK: Optional[int] = None
    out: Optional[str] = None


class TrainCompleterBody(BaseModel):
    dataset: str
    grammarRef: str = "drone"
    epochs: Optional[int] = None
    seed: int = 7
    out: Optional[str] = None


class CompleteBody(BaseModel):
    taskId: Optional[str] = None
    branch: str = MAIN_BRANCH
    grammarRef: Optional[str] = None
    prefix: Optional[dict] = None
    k: int = 3
    maxLen: Optional[int] = None


class PreviewBody(BaseModel):
    grammarRef: str
    sequence: dict


def _sequence_from(payload: dict) -> DesignSequence:
    try:
        return DesignSequence.from_dict(payload)
    except (KeyError, TypeError, ValueError) as exc:
        raise ApiError("bad_request", f"malformed sequence: {exc}") from exc


def create_app(cfg: ApiConfig, clock: Callable[[], float] = time.time) -> FastAPI:
    data_dir = Path(cfg.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    store = SessionStore(data_dir, clock=clock)
    app = FastAPI(title="shapeforge service")
    app.state.store = store
    app.state.config = cfg

    app.add_middleware(
        CORSMiddleware,
        allow_origins=list(cfg.cors_origins),
        allow_methods=["*"],
        allow_headers=["*"],
    )

    def resolve(rel: Optional[str], default: str = "") -> Path:
        raw = rel or default
        path = (data_dir / raw).resolve()
        if not str(path).startswith(str(data_dir.resolve())):
            raise ApiError("bad_request", f"path {raw!r} escapes the data directory")
        return path

    @app.middleware("http")
    async def body_cap(request: Request, call_next):
        length = request.headers.get("content-length")
        if length and int(length) > cfg.max_body_bytes:
            return JSONResponse(
                status_code=413,
                content={"error": {"code": "bad_request", "message": "request too large"}},
            )
        return await call_next(request)

    @app.exception_handler(ApiError)
    async def api_error_handler(_req, exc: ApiError):
        return exc.to_response()

    @app.exception_handler(Exception)
    async def unexpected_handler(_req, exc: Exception):
        return ApiError("internal", f"{type(exc).__name__}: {exc}").to_response()

    def grammar_or_404(ref: str) -> Grammar:
        try:
            return store.grammar(ref)
        except SessionError as exc:
            raise ApiError("not_found", str(exc)) from exc

    def task_or_404(task_id: str):
        try:
            return store.task(task_id)
        except UnknownTask as exc:
            raise ApiError("not_found", str(exc)) from exc

    def grammar_to_dict(ref: str, g: Grammar) -> dict:
        return {
            "ref": ref,
            "productKind": g.product_kind,
            "shapeTypes": list(g.shape_types),
            "axiom": g.axiom,
            "units": [
                {
                    "name": u.name,
                    "primitive": u.primitive,
                    "sizeParams": [
                        {"name": p.name, "unit": p.unit, "min": p.min, "max": p.max, "kind": p.kind}
                        for p in u.size_params
                    ],
                    "ports": [
                        {"name": p.name, "position": list(p.position), "orientation": list(p.orientation)}
                        for p in u.ports
                    ],
                }
                for u in g.units
            ],
            "rules": [
                {
                    "id": r.id,
                    "adds": r.adds_unit,
                    "host": {"unit": r.host_unit, "port": r.host_port},
                    "symmetry": r.symmetry,
                    "params": [
                        {"name": p.name, "unit": p.unit, "min": p.min, "max": p.max, "kind": p.kind}
                        for p in r.params
                    ],
                }
                for r in g.rules
            ],
            "source": serialize_grammar(g),
        }

    # -- health and grammar routes -------------------------------------------

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/grammar/validate")
    def grammar_validate(body: ValidateBody):
        try:
            g = parse_grammar(body.source)
        except GrammarError as exc:
            return {"ok": False, "issues": [{"where": "parse", "message": str(exc)}]}
        issues = validate_grammar(g)
        return {"ok": not issues, "issues": [i.to_dict() for i in issues]}

    @app.get("/grammar")
    def grammar_list():
        return {"grammars": store.grammar_refs()}

    @app.get("/grammar/{ref}")
    def grammar_get(ref: str):
        return grammar_to_dict(ref, grammar_or_404(ref))

    @app.post("/grammar/legal-rules")
    def grammar_legal(body: LegalRulesBody):
        if body.taskId:
            task = task_or_404(body.taskId)
            g = grammar_or_404(task.grammar_ref)
            if body.sequence is not None:
                seq = _sequence_from(body.sequence)
            else:
                seq = store.get_progress(body.taskId).sequences[MAIN_BRANCH]
        elif body.grammarRef and body.sequence is not None:
            g = grammar_or_404(body.grammarRef)
            seq = _sequence_from(body.sequence)
        else:
            raise ApiError("bad_request", "provide taskId or grammarRef+sequence")
        try:
            legal = legal_rules(g, seq)
        except GrammarViolation as exc:
            raise ApiError(
                "grammar_violation", str(exc), violation=exc.violation.to_dict()
            ) from exc
        return {"legal": {rid: hosts for rid, hosts in sorted(legal.items())}}

    # -- task/session routes ---------------------------------------------------

    @app.post("/tasks", status_code=201)
    def tasks_create(body: CreateTaskBody):
        ref = body.grammarRef
        if body.grammar is not None:
            ref = body.grammarName or f"g{len(store.grammar_refs()) + 1:03d}"
            try:
                store.register_grammar(ref, body.grammar)
            except (GrammarError, SessionError) as exc:
                raise ApiError("bad_request", str(exc)) from exc
        if not ref:
            raise ApiError("bad_request", "provide grammarRef or grammar source")
        grammar_or_404(ref)
        try:
            task = store.publish_task(body.publisher, ref, body.shapeType, body.description)
        except SessionError as exc:
            raise ApiError("bad_request", str(exc)) from exc
        return task.to_dict()

    @app.get("/tasks")
    def tasks_list():
        return {"tasks": [store.task(tid).to_dict() for tid in store.task_ids()]}

    @app.get("/tasks/{task_id}")
    def tasks_get(task_id: str):
        return task_or_404(task_id).to_dict()

    def _submit(task_id: str, designer: str, kind: str, branch: str, index: int, apps_raw: list):
        task_or_404(task_id)
        try:
            apps = [RuleApplication.from_dict(a) for a in apps_raw]
        except (KeyError, TypeError, ValueError) as exc:
            raise ApiError("bad_request", f"malformed application: {exc}") from exc
        event = store.submit(
            task_id, designer, kind, applications=apps, branch=branch, index=index
        )
        if event.outcome == "rejected":
            raise ApiError(
                "grammar_violation",
                event.violation.message,
                violation=event.violation.to_dict(),
            )
        return {"event": event.to_dict()}

    @app.post("/tasks/{task_id}/submit")
    def tasks_submit(task_id: str, body: SubmitBody):
        if body.kind not in (APPEND, REPLACE):
            raise ApiError("bad_request", f"unsupported submission kind {body.kind!r}")
        return _submit(task_id, body.designer, body.kind, body.branch, body.index, body.applications)

    @app.post("/tasks/{task_id}/finalize")
    def tasks_finalize(task_id: str, body: FinalizeBody):
        return _submit(task_id, body.designer, FINALIZE, body.branch, 0, [])

    @app.get("/tasks/{task_id}/progress")
    def tasks_progress(task_id: str):
        task_or_404(task_id)
        return store.get_progress(task_id).to_dict()

    @app.get("/tasks/{task_id}/solutions")
    def tasks_solutions(task_id: str):
        task_or_404(task_id)
        return {
            "solutions": {b: s.to_dict() for b, s in store.collect_solutions(task_id).items()}
        }

    @app.get("/tasks/{task_id}/contributions")
    def tasks_contributions(task_id: str):
        task_or_404(task_id)
        out = {}
        for branch in store.collect_solutions(task_id):
            out[branch] = store.estimate_contribution(task_id, branch).to_dict()
        return {"contributions": out}

    # -- geometry ---------------------------------------------------------------

    def _assembly_response(g: Grammar, seq: DesignSequence, fmt: str):
        try:
            assembly = realize(g, seq)
        except GrammarViolation as exc:
            raise ApiError(
                "grammar_violation", str(exc), violation=exc.violation.to_dict()
            ) from exc
        if fmt == "obj":
            return PlainTextResponse(assembly_to_obj(g, assembly))
        doc = assembly.to_dict()
        doc["violations"] = [v.to_dict() for v in check_constraints(g, seq)]
        return doc

    @app.get("/assembly/{task_id}")
    def assembly_get(task_id: str, branch: str = MAIN_BRANCH, format: str = "json"):
        task = task_or_404(task_id)
        g = grammar_or_404(task.grammar_ref)
        progress = store.get_progress(task_id)
        if branch not in progress.sequences:
            raise ApiError("not_found", f"unknown branch {branch!r}")
        return _assembly_response(g, progress.sequences[branch], format)

    @app.post("/assembly/preview")
    def assembly_preview(body: PreviewBody, format: str = "json"):
        g = grammar_or_404(body.grammarRef)
        return _assembly_response(g, _sequence_from(body.sequence), format)

    # -- expand routes (KET2) ----------------------------------------------------

    @app.post("/expand/train-gan")
    def expand_train(body: TrainGanBody):
        g = grammar_or_404(body.grammarRef)
        path = resolve(body.dataset)
        if not path.exists():
            raise ApiError("not_found", f"dataset {body.dataset!r} not found")
        dataset = read_dataset(path)
        space = SpaceConfig.for_grammar(g)
        kwargs = {"seed": body.seed}
        if body.epochs is not None:
            kwargs["epochs"] = body.epochs
        gan_cfg = GanConfig(**kwargs)
        try:
            model = train_gan(dataset, gan_cfg, space, g.shape_types)
        except ValueError as exc:
            raise ApiError("bad_request", str(exc)) from exc
        out = resolve(body.out, cfg.gan_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        save_gan(out, model)
        return {
            "trained": len(dataset),
            "epochs": gan_cfg.epochs,
            "finalLoss": model.loss_history[-1] if model.loss_history else None,
            "checkpoint": str(out.relative_to(data_dir)),
        }

    @app.post("/expand/sample")
    def expand_sample(body: SampleBody):
        path = resolve(body.model, cfg.gan_path)
        if not path.exists():
            raise ApiError("model_missing", f"no GAN checkpoint at {path.name!r}; train first")
        model = load_gan(path)
        try:
            samples = sample(model, body.label, body.n, body.seed)
        except ValueError as exc:
            raise ApiError("bad_request", str(exc)) from exc
        result: dict[str, Any] = {"n": len(samples), "label": body.label}
        if body.out:
            out = resolve(body.out)
            out.parent.mkdir(parents=True, exist_ok=True)
            write_dataset(out, samples)
            result["dataset"] = str(out.relative_to(data_dir))
        return result

    @app.post("/expand/select")
    def expand_select(body: SelectBody):
        g = grammar_or_404(body.grammarRef)
        path = resolve(body.dataset)
        if not path.exists():
            raise ApiError("not_found", f"dataset {body.dataset!r} not found")
        if (body.threshold is None) == (body.topK is None):
            raise ApiError("bad_request", "set exactly one of threshold / topK")
        space = SpaceConfig.for_grammar(g)
        records = read_dataset(path)
        snapped: list[DesignSequence] = []
        snap_failures = 0
        for e in records:
            r = snap_sequence(g, space, e)
            if isinstance(r, SnapFailure):
                snap_failures += 1
            else:
                snapped.append(r)
        net = causal_map_to_bayesnet(CausalMap.from_dict(drone_criteria_map()))
        policy = SelectPolicy(threshold=body.threshold, top_k=body.topK)
        kept = select(snapped, net, g, policy)
        result = {
            "input": len(records),
            "snapFailures": snap_failures,
            "kept": len(kept),
            "scores": {str(i): s for i, s in kept},
        }
        if body.out:
            out = resolve(body.out)
            out.parent.mkdir(parents=True, exist_ok=True)
            from ..vecspace import embed_sequence

            write_dataset(out, (embed_sequence(g, space, snapped[i]) for i, _ in kept))
            result["dataset"] = str(out.relative_to(data_dir))
        return result

    # -- completion routes (KET3) --------------------------------------------------

    @app.post("/complete/train")
    def complete_train(body: TrainCompleterBody):
        g = grammar_or_404(body.grammarRef)
        path = resolve(body.dataset)
        if not path.exists():
            raise ApiError("not_found", f"dataset {body.dataset!r} not found")
        space = SpaceConfig.for_grammar(g)
        sequences = []
        for e in read_dataset(path):
            r = snap_sequence(g, space, e)
            if not isinstance(r, SnapFailure):
                sequences.append(r)
        vocab = TokenVocab.for_grammar(g)
        kwargs = {"seed": body.seed}
        if body.epochs is not None:
            kwargs["epochs"] = body.epochs
        ccfg = CompleterConfig(**kwargs)
        sampler = PairSampler(g, vocab, sequences, SequenceSplit("uniform"), seed=body.seed)
        try:
            model = train_completer(sampler, ccfg, vocab)
        except ValueError as exc:
            raise ApiError("bad_request", str(exc)) from exc
        out = resolve(body.out, cfg.completer_path)
        out.parent.mkdir(parents=True, exist_ok=True)
        save_completer(out, model)
        return {
            "trained": len(sequences),
            "epochs": ccfg.epochs,
            "finalLoss": model.loss_curve[-1] if model.loss_curve else None,
            "checkpoint": str(out.relative_to(data_dir)),
        }

    @app.post("/complete")
    def complete_route(body: CompleteBody):
        path = resolve(cfg.completer_path)
        if not path.exists():
            raise ApiError(
                "model_missing",
                f"no completer checkpoint at {cfg.completer_path!r}; train first",
            )
        model = load_completer(path)
        if body.taskId:
            task = task_or_404(body.taskId)
            g = grammar_or_404(task.grammar_ref)
            progress = store.get_progress(body.taskId)
            if body.branch not in progress.sequences:
                raise ApiError("not_found", f"unknown branch {body.branch!r}")
            prefix = progress.sequences[body.branch]
        elif body.grammarRef and body.prefix is not None:
            g = grammar_or_404(body.grammarRef)
            prefix = _sequence_from(body.prefix)
        else:
            raise ApiError("bad_request", "provide taskId or grammarRef+prefix")
        try:
            replay(g, prefix)
        except GrammarViolation as exc:
            raise ApiError(
                "grammar_violation", str(exc), violation=exc.violation.to_dict()
            ) from exc
        completions = complete(model, g, prefix, k=max(1, body.k), max_new_tokens=body.maxLen)
        rows = []
        for c in completions:
            full = DesignSequence(
                shape_type=prefix.shape_type, applications=prefix.applications + c.suffix
            )
            violations = check_constraints(g, full)  # defense in depth over masking
            if violations:
                continue
            rows.append(c.to_dict())
        return {"completions": rows, "prefixLength": len(prefix.applications)}

    return app


def serve(cfg: ApiConfig) -> None:
    """Run the service until interrupted."""
    import uvicorn

    uvicorn.run(create_app(cfg), host=cfg.host, port=cfg.port, log_level="warning")
