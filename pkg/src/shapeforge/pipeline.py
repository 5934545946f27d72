"""End-to-end orchestration: seed corpus -> GAN expansion -> Bayesian
selection -> completer training -> constrained completion.

The demo chains every stage on the bundled drone grammar with fixed seeds
and emits a JSON-stable summary: identical manifests produce byte-identical
summaries.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .bayes import (
    CausalMap,
    SelectPolicy,
    causal_map_to_bayesnet,
    score_solution,
    select,
)
from .completer import (
    CompleterConfig,
    PairSampler,
    SequenceSplit,
    TokenVocab,
    complete,
    save_completer,
    train_completer,
)
from .gan import GanConfig, GanModel, sample, save_gan, train_gan
from .grammar.engine import check_constraints
from .grammar.fixtures import drone_criteria_map, drone_grammar
from .grammar.model import DesignSequence, Grammar
from .grammar.walks import generate_corpus
from .vecspace import (
    EmbeddedSequence,
    SnapFailure,
    SpaceConfig,
    embed_sequence,
    snap_sequence,
    write_dataset,
)


@dataclass(frozen=True)
class DemoManifest:
    """Seeds and sizes that pin every demo artifact."""

    walk_seed: int = 7
    gan_seed: int = 7
    completer_seed: int = 7
    sample_seed: int = 7
    seed_corpus: int = 500
    sample_count: int = 2000
    threshold: float = 0.5
    gan_epochs: int = 150
    completer_epochs: int = 12
    out_dir: Optional[str] = None

    @staticmethod
    def with_seed(seed: int, **overrides) -> "DemoManifest":
        base = dict(
            walk_seed=seed,
            gan_seed=seed,
            completer_seed=seed,
            sample_seed=seed,
        )
        base.update(overrides)
        return DemoManifest(**base)


def expand_corpus(
    model: GanModel,
    g: Grammar,
    cfg: SpaceConfig,
    per_label: dict[str, int],
    seed: int,
) -> tuple[list[EmbeddedSequence], list[DesignSequence], int]:
    """Sample per label and snap; returns (embeddings, snapped, failures)."""
    embeddings: list[EmbeddedSequence] = []
    snapped: list[DesignSequence] = []
    failures = 0
    for offset, (label, n) in enumerate(sorted(per_label.items())):
        for e in sample(model, label, n, seed + offset):
            embeddings.append(e)
            result = snap_sequence(g, cfg, e)
            if isinstance(result, SnapFailure):
                failures += 1
            else:
                snapped.append(result)
    return embeddings, snapped, failures


def run_demo(manifest: DemoManifest = DemoManifest()) -> dict:
    """Full pipeline on the drone fixture; returns the summary document."""
    g = drone_grammar()
    space = SpaceConfig.for_grammar(g)
    out_dir = Path(manifest.out_dir) if manifest.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    # 1. seed designs standing in for designer submissions (synthetic walks)
    walks = generate_corpus(g, manifest.seed_corpus + 1, seed=manifest.walk_seed)
    held_out, walks = walks[-1], walks[:-1]
    type_counts: dict[str, int] = {}
    for s in walks:
        type_counts[s.shape_type] = type_counts.get(s.shape_type, 0) + 1

    # 2. embed and train the conditional GAN
    dataset = [embed_sequence(g, space, s) for s in walks]
    if out_dir:
        write_dataset(out_dir / "seed_corpus.jsonl", dataset)
    gan_cfg = GanConfig(epochs=manifest.gan_epochs, seed=manifest.gan_seed)
    gan_model = train_gan(dataset, gan_cfg, space, g.shape_types)
    if out_dir:
        save_gan(out_dir / "gan.json", gan_model)

    # 3. sample, snap, and filter through the Bayesian criteria net
    per_label = {t: manifest.sample_count // len(g.shape_types) for t in g.shape_types}
    embeddings, snapped, snap_failures = expand_corpus(
        gan_model, g, space, per_label, manifest.sample_seed
    )
    if out_dir:
        write_dataset(out_dir / "expanded.jsonl", embeddings)
    net = causal_map_to_bayesnet(CausalMap.from_dict(drone_criteria_map()))
    kept_pairs = select(snapped, net, g, SelectPolicy(threshold=manifest.threshold))
    selected = [snapped[i] for i, _ in kept_pairs]
    if out_dir:
        write_dataset(
            out_dir / "selected.jsonl",
            (embed_sequence(g, space, s) for s in selected),
        )

    motor_hits = {t: 0 for t in g.shape_types}
    expected = {"4-motor Drone": 4, "2-motor Drone": 2}
    for s in snapped:
        want = expected.get(s.shape_type)
        motors = sum(1 for a in s.applications if a.rule_id == "add_motor")
        if want is not None and motors == want:
            motor_hits[s.shape_type] += 1

    # 4. train the completer on the selected expansion
    vocab = TokenVocab.for_grammar(g)
    completer_cfg = CompleterConfig(
        epochs=manifest.completer_epochs, seed=manifest.completer_seed
    )
    sampler = PairSampler(
        g, vocab, selected, SequenceSplit("uniform"), seed=manifest.completer_seed
    )
    completer = train_completer(sampler, completer_cfg, vocab)
    if out_dir:
        save_completer(out_dir / "completer.json", completer)

    # 5. complete a held-out prefix and verify the finished design
    prefix_len = min(5, max(1, len(held_out.applications) - 1))
    prefix = DesignSequence(
        shape_type=held_out.shape_type,
        applications=held_out.applications[:prefix_len],
    )
    completions = complete(completer, g, prefix, k=5)
    completion_rows = []
    all_valid = True
    for c in completions:
        full = DesignSequence(
            shape_type=prefix.shape_type, applications=prefix.applications + c.suffix
        )
        violations = check_constraints(g, full)
        all_valid = all_valid and not violations
        completion_rows.append(
            {
                "rules": [a.rule_id for a in c.suffix],
                "score": c.score,
                "bayesScore": score_solution(net, g, full),
                "violations": [v.to_dict() for v in violations],
            }
        )

    summary = {
        "grammar": {
            "productKind": g.product_kind,
            "units": len(g.units),
            "rules": len(g.rules),
            "shapeTypes": list(g.shape_types),
        },
        "seedCorpus": {
            "count": len(walks),
            "byType": dict(sorted(type_counts.items())),
            "synthetic": True,
        },
        "gan": {
            "epochs": gan_cfg.epochs,
            "seed": gan_cfg.seed,
            "finalLoss": gan_model.loss_history[-1] if gan_model.loss_history else None,
        },
        "expansion": {
            "requested": manifest.sample_count,
            "snapped": len(snapped),
            "snapFailures": snap_failures,
            "snapRate": len(snapped) / max(1, len(embeddings)),
            "motorCountMatches": dict(sorted(motor_hits.items())),
        },
        "selection": {
            "threshold": manifest.threshold,
            "kept": len(selected),
            "keptRate": len(selected) / max(1, len(snapped)),
        },
        "completer": {
            "epochs": completer_cfg.epochs,
            "seed": completer_cfg.seed,
            "finalLoss": completer.loss_curve[-1] if completer.loss_curve else None,
        },
        "completion": {
            "heldOutType": held_out.shape_type,
            "prefixRules": [a.rule_id for a in prefix.applications],
            "k": 5,
            "returned": len(completions),
            "allValid": all_valid,
            "suffixes": completion_rows,
        },
    }
    if out_dir:
        (out_dir / "summary.json").write_text(dumps_summary(summary), encoding="utf-8")
    return summary


def dumps_summary(summary: dict) -> str:
    return json.dumps(summary, sort_keys=True, indent=2) + "\n"
