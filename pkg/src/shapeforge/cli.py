"""Batch driver for the pipeline and the reproducible demo.

Exit codes: 0 success, 1 usage, 2 validation failure, 3 runtime failure.
Failures print a one-line JSON document to stderr. DATA_DIR overrides the
default data directory for the serve/contributions commands.
"""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import click

from .bayes import CausalMap, SelectPolicy, causal_map_to_bayesnet, select as bayes_select
from .completer import (
    CompleterConfig,
    PairSampler,
    SequenceSplit,
    TokenVocab,
    complete as completer_complete,
    load_completer,
    save_completer,
    train_completer,
)
from .gan import GanConfig, load_gan, sample as gan_sample, save_gan, train_gan
from .grammar.dsl import parse_grammar
from .grammar.engine import check_constraints, initial_state, legal_rules, least_loaded_host, replay, step
from .grammar.fixtures import drone_criteria_map, drone_grammar
from .grammar.model import DesignSequence, GrammarError, GrammarViolation, RuleApplication
from .grammar.validate import validate_grammar
from .grammar.walks import generate_corpus, midpoint_params
from .pipeline import DemoManifest, dumps_summary, run_demo
from .session import SessionStore
from .vecspace import (
    SnapFailure,
    SpaceConfig,
    embed_sequence,
    read_dataset,
    snap_sequence,
    write_dataset,
)

USAGE, VALIDATION, RUNTIME = 1, 2, 3


def _fail(code: int, kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    sys.exit(code)


def _outpath(path: str) -> str:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    return path


def _load_grammar(ref: str):
    if ref == "drone":
        return drone_grammar()
    path = Path(ref)
    if not path.exists():
        _fail(USAGE, "usage", f"grammar {ref!r} not found (use 'drone' or a .sg path)")
    try:
        return parse_grammar(path.read_text(encoding="utf-8"))
    except GrammarError as exc:
        _fail(VALIDATION, "grammar", str(exc))


def _read_sequences(path: str) -> list[DesignSequence]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                out.append(DesignSequence.from_dict(json.loads(line)))
    return out


def _parse_prefix_spec(g, spec: str) -> DesignSequence:
    """Inline prefix: '<shapeType>:<ruleId>[*n]+<ruleId>[*n]...' with midpoint
    params and least-loaded hosts."""
    if ":" not in spec:
        _fail(USAGE, "usage", "prefix spec must look like 'SHAPETYPE:rule*2+rule'")
    shape_type, _, rules_part = spec.partition(":")
    state = initial_state(g, shape_type)
    for chunk in rules_part.split("+"):
        chunk = chunk.strip()
        if not chunk:
            continue
        rid, _, times = chunk.partition("*")
        n = int(times) if times else 1
        for _ in range(n):
            legal = legal_rules(g, state)
            if rid not in legal:
                _fail(VALIDATION, "grammar", f"rule {rid!r} is not legal at this prefix")
            host = least_loaded_host(state, legal[rid])
            app = RuleApplication(rid, host, midpoint_params(g.rule(rid)))
            state = step(state, app)
    return DesignSequence(shape_type=shape_type, applications=state.applications)


@click.group()
def main() -> None:
    """Grammar-driven generative product shape design pipeline."""


@main.command("grammar-check")
@click.argument("grammar")
def grammar_check(grammar: str) -> None:
    """Parse and validate a grammar file (or the bundled 'drone')."""
    g = _load_grammar(grammar)
    issues = validate_grammar(g)
    click.echo(json.dumps({"ok": not issues, "issues": [i.to_dict() for i in issues]}))
    if issues:
        sys.exit(VALIDATION)


@main.command()
@click.option("--grammar", default="drone", show_default=True)
@click.option("--n", default=500, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--out", required=True, type=click.Path())
def walk(grammar: str, n: int, seed: int, out: str) -> None:
    """Generate n random-but-valid design sequences (synthetic seed corpus)."""
    g = _load_grammar(grammar)
    corpus = generate_corpus(g, n, seed=seed)
    with open(_outpath(out), "w", encoding="utf-8") as fh:
        for s in corpus:
            fh.write(json.dumps(s.to_dict(), sort_keys=True) + "\n")
    click.echo(json.dumps({"written": len(corpus), "out": out, "synthetic": True}))


@main.command()
@click.option("--grammar", default="drone", show_default=True)
@click.option("--sequences", "seq_path", required=True, type=click.Path(exists=True))
@click.option("--out", required=True, type=click.Path())
def embed(grammar: str, seq_path: str, out: str) -> None:
    """Embed design sequences into the fixed-shape matrix dataset."""
    g = _load_grammar(grammar)
    space = SpaceConfig.for_grammar(g)
    seqs = _read_sequences(seq_path)
    n = write_dataset(_outpath(out), (embed_sequence(g, space, s) for s in seqs))
    click.echo(json.dumps({"written": n, "out": out, "rowWidth": space.row_width}))


@main.command("train-gan")
@click.option("--grammar", default="drone", show_default=True)
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--epochs", default=None, type=int)
@click.option("--seed", default=7, show_default=True)
@click.option("--out", required=True, type=click.Path())
def train_gan_cmd(grammar: str, dataset: str, epochs, seed: int, out: str) -> None:
    """Train the conditional GAN on an embedded dataset."""
    g = _load_grammar(grammar)
    space = SpaceConfig.for_grammar(g)
    records = read_dataset(dataset)
    kwargs = {"seed": seed}
    if epochs is not None:
        kwargs["epochs"] = epochs
    cfg = GanConfig(**kwargs)
    try:
        model = train_gan(records, cfg, space, g.shape_types)
    except ValueError as exc:
        _fail(VALIDATION, "gan", str(exc))
    save_gan(_outpath(out), model)
    click.echo(
        json.dumps(
            {"trained": len(records), "epochs": cfg.epochs, "out": out,
             "finalLoss": model.loss_history[-1] if model.loss_history else None}
        )
    )


@main.command()
@click.option("--model", required=True, type=click.Path(exists=True))
@click.option("--label", required=True)
@click.option("--n", default=200, show_default=True)
@click.option("--seed", default=7, show_default=True)
@click.option("--out", required=True, type=click.Path())
def sample(model: str, label: str, n: int, seed: int, out: str) -> None:
    """Sample generated designs from a trained GAN checkpoint."""
    gan_model = load_gan(model)
    try:
        records = gan_sample(gan_model, label, n, seed)
    except ValueError as exc:
        _fail(VALIDATION, "gan", str(exc))
    write_dataset(_outpath(out), records)
    click.echo(json.dumps({"written": len(records), "out": out, "label": label}))


@main.command()
@click.option("--grammar", default="drone", show_default=True)
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--tau", default=None, type=float, help="keep scores >= tau")
@click.option("--top-k", default=None, type=int, help="keep the k best")
@click.option("--out", default=None, type=click.Path(), help="write kept designs here")
@click.option("--report", default=None, type=click.Path(), help="write score report here")
def select(grammar: str, dataset: str, tau, top_k, out, report) -> None:
    """Snap generated designs and filter them through the criteria network."""
    if (tau is None) == (top_k is None):
        _fail(USAGE, "usage", "set exactly one of --tau / --top-k")
    g = _load_grammar(grammar)
    space = SpaceConfig.for_grammar(g)
    records = read_dataset(dataset)
    snapped, failures = [], 0
    for e in records:
        r = snap_sequence(g, space, e)
        if isinstance(r, SnapFailure):
            failures += 1
        else:
            snapped.append(r)
    net = causal_map_to_bayesnet(CausalMap.from_dict(drone_criteria_map()))
    kept = bayes_select(snapped, net, g, SelectPolicy(threshold=tau, top_k=top_k))
    if out:
        write_dataset(_outpath(out), (embed_sequence(g, space, snapped[i]) for i, _ in kept))
    doc = {
        "input": len(records),
        "snapFailures": failures,
        "kept": len(kept),
        "scores": {str(i): s for i, s in kept},
    }
    if report:
        Path(_outpath(report)).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")
    click.echo(json.dumps({k: v for k, v in doc.items() if k != "scores"}))


@main.command("train-completer")
@click.option("--grammar", default="drone", show_default=True)
@click.option("--dataset", required=True, type=click.Path(exists=True))
@click.option("--epochs", default=None, type=int)
@click.option("--seed", default=7, show_default=True)
@click.option("--out", required=True, type=click.Path())
def train_completer_cmd(grammar: str, dataset: str, epochs, seed: int, out: str) -> None:
    """Train the sequence completer on an embedded dataset."""
    g = _load_grammar(grammar)
    space = SpaceConfig.for_grammar(g)
    sequences = []
    for e in read_dataset(dataset):
        r = snap_sequence(g, space, e)
        if not isinstance(r, SnapFailure):
            sequences.append(r)
    vocab = TokenVocab.for_grammar(g)
    kwargs = {"seed": seed}
    if epochs is not None:
        kwargs["epochs"] = epochs
    cfg = CompleterConfig(**kwargs)
    sampler = PairSampler(g, vocab, sequences, SequenceSplit("uniform"), seed=seed)
    try:
        model = train_completer(sampler, cfg, vocab)
    except ValueError as exc:
        _fail(VALIDATION, "completer", str(exc))
    save_completer(_outpath(out), model)
    click.echo(
        json.dumps(
            {"trained": len(sequences), "epochs": cfg.epochs, "out": out,
             "finalLoss": model.loss_curve[-1] if model.loss_curve else None}
        )
    )


@main.command()
@click.option("--grammar", default="drone", show_default=True)
@click.option("--model", required=True, type=click.Path(exists=True))
@click.option("--prefix", required=True,
              help="inline spec 'SHAPETYPE:rule*2+rule' or a JSON file path")
@click.option("--k", default=5, show_default=True)
@click.option("--max-len", default=None, type=int)
def complete(grammar: str, model: str, prefix: str, k: int, max_len) -> None:
    """Recommend grammar-valid completions for a partial design."""
    g = _load_grammar(grammar)
    completer = load_completer(model)
    if Path(prefix).exists():
        seq = DesignSequence.from_dict(json.loads(Path(prefix).read_text()))
    else:
        seq = _parse_prefix_spec(g, prefix)
    try:
        replay(g, seq)
    except GrammarViolation as exc:
        _fail(VALIDATION, "grammar", str(exc))
    completions = completer_complete(completer, g, seq, k=k, max_new_tokens=max_len)
    rows = []
    for c in completions:
        full = DesignSequence(shape_type=seq.shape_type, applications=seq.applications + c.suffix)
        rows.append(
            {
                "suffix": [a.to_dict() for a in c.suffix],
                "rules": [a.rule_id for a in c.suffix],
                "score": c.score,
                "valid": not check_constraints(g, full),
            }
        )
    click.echo(json.dumps({"prefix": [a.rule_id for a in seq.applications], "completions": rows}, indent=2))
    if not rows:
        sys.exit(VALIDATION)


@main.command()
@click.option("--data-dir", default=None, type=click.Path())
@click.option("--task", "task_id", required=True)
@click.option("--solution", default="main", show_default=True)
def contributions(data_dir, task_id: str, solution: str) -> None:
    """Print the contribution-share report for a finalized solution."""
    root = data_dir or os.environ.get("DATA_DIR", "./data")
    store = SessionStore(root)
    try:
        report = store.estimate_contribution(task_id, solution)
    except Exception as exc:  # noqa: BLE001 - surfaced as a validation failure
        _fail(VALIDATION, "session", str(exc))
    click.echo(json.dumps(report.to_dict(), sort_keys=True))


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8321, show_default=True)
@click.option("--data-dir", default=None, type=click.Path())
def serve(host: str, port: int, data_dir) -> None:
    """Run the HTTP service."""
    from .service import ApiConfig, serve as run_service

    root = data_dir or os.environ.get("DATA_DIR", "./data")
    run_service(ApiConfig(data_dir=root, host=host, port=port))


@main.command()
@click.option("--seed", default=7, show_default=True)
@click.option("--out", default=None, type=click.Path(), help="artifact directory")
@click.option("--seed-corpus", default=500, show_default=True)
@click.option("--samples", default=2000, show_default=True)
@click.option("--tau", default=0.5, show_default=True)
@click.option("--gan-epochs", default=150, show_default=True)
@click.option("--completer-epochs", default=12, show_default=True)
def demo(seed, out, seed_corpus, samples, tau, gan_epochs, completer_epochs) -> None:
    """Run the full pipeline on the drone fixture and print the summary."""
    manifest = DemoManifest.with_seed(
        seed,
        seed_corpus=seed_corpus,
        sample_count=samples,
        threshold=tau,
        gan_epochs=gan_epochs,
        completer_epochs=completer_epochs,
        out_dir=out,
    )
    try:
        summary = run_demo(manifest)
    except Exception as exc:  # noqa: BLE001 - demo failures are runtime errors
        _fail(RUNTIME, "demo", f"{type(exc).__name__}: {exc}")
    sys.stdout.write(dumps_summary(summary))


if __name__ == "__main__":
    main()
