"""Prefix/suffix training pairs and the teacher-forced training loop."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from ..grammar.model import DesignSequence, Grammar
from ..nn.core import adam_step
from ..nn.losses import softmax_xent
from .model import CompleterConfig, CompleterModel
from .vocab import BOS, EOS, PAD, TokenVocab, application_tokens


@dataclass(frozen=True)
class SequenceSplit:
    """How a solution of M rules splits into an m-rule prefix and the rest."""

    strategy: str = "uniform"  # "uniform" (random m per epoch) | "fixed"
    m: Optional[int] = None

    def __post_init__(self) -> None:
        if self.strategy not in ("uniform", "fixed"):
            raise ValueError(f"unknown split strategy {self.strategy!r}")
        if self.strategy == "fixed" and (self.m is None or self.m < 1):
            raise ValueError("fixed strategy needs m >= 1")


@dataclass(frozen=True)
class TrainingPair:
    input_tokens: tuple[int, ...]  # BOS, COND, first m rule groups
    target_tokens: tuple[int, ...]  # remaining M-m rule groups, EOS


def make_training_pairs(
    g: Grammar,
    vocab: TokenVocab,
    dataset: Sequence[DesignSequence],
    split: SequenceSplit,
    seed: int,
) -> tuple[list[TrainingPair], int]:
    """(pairs, skipped) where solutions with fewer than 2 rules are skipped.

    Pairs carry no real/generated provenance flag; the completer treats all
    corpus items alike.
    """
    rng = np.random.default_rng(seed)
    pairs: list[TrainingPair] = []
    skipped = 0
    for s in dataset:
        total = len(s.applications)
        if total < 2:
            skipped += 1
            continue
        if split.strategy == "fixed":
            m = min(split.m, total - 1)
        else:
            m = int(rng.integers(1, total))
        groups = [application_tokens(g, vocab, a) for a in s.applications]
        inp = [BOS, vocab.cond_token(s.shape_type)]
        for grp in groups[:m]:
            inp.extend(grp)
        tgt: list[int] = []
        for grp in groups[m:]:
            tgt.extend(grp)
        tgt.append(EOS)
        pairs.append(TrainingPair(tuple(inp), tuple(tgt)))
    return pairs, skipped


class PairSampler:
    """Resamples split points every epoch (the uniform-random strategy)."""

    def __init__(
        self,
        g: Grammar,
        vocab: TokenVocab,
        dataset: Sequence[DesignSequence],
        split: SequenceSplit,
        seed: int,
    ):
        self.g = g
        self.vocab = vocab
        self.dataset = dataset
        self.split = split
        self.seed = seed

    def epoch_pairs(self, epoch: int) -> list[TrainingPair]:
        pairs, _ = make_training_pairs(
            self.g, self.vocab, self.dataset, self.split, self.seed + epoch
        )
        return pairs


def _batch_arrays(
    pairs: Sequence[TrainingPair], max_len: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Pad a batch and build next-token targets with a target-only mask."""
    seqs = [list(p.input_tokens) + list(p.target_tokens) for p in pairs]
    longest = min(max(len(s) for s in seqs), max_len)
    b = len(seqs)
    ids = np.full((b, longest), PAD, dtype=np.int64)
    targets = np.full((b, longest), PAD, dtype=np.int64)
    mask = np.zeros((b, longest))
    for i, (p, seq) in enumerate(zip(pairs, seqs)):
        seq = seq[:longest]
        ids[i, : len(seq)] = seq
        start = len(p.input_tokens) - 1  # position predicting the first target
        for t in range(start, len(seq) - 1):
            targets[i, t] = seq[t + 1]
            mask[i, t] = 1.0
    return ids, targets, mask


def train_completer(
    pairs_or_sampler: Union[Sequence[TrainingPair], PairSampler],
    cfg: CompleterConfig,
    vocab: TokenVocab,
) -> CompleterModel:
    """Teacher-forced next-token training; loss is averaged per epoch."""
    model = CompleterModel.build(cfg, vocab)
    rng = np.random.default_rng(cfg.seed)

    static_pairs: Optional[list[TrainingPair]] = None
    if not isinstance(pairs_or_sampler, PairSampler):
        static_pairs = list(pairs_or_sampler)
        if not static_pairs:
            raise ValueError("no training pairs")

    for epoch in range(cfg.epochs):
        pairs = (
            pairs_or_sampler.epoch_pairs(epoch) if static_pairs is None else static_pairs
        )
        if not pairs:
            raise ValueError("no training pairs")
        order = rng.permutation(len(pairs))
        losses = []
        for start in range(0, len(pairs), cfg.batch):
            batch = [pairs[i] for i in order[start : start + cfg.batch]]
            ids, targets, mask = _batch_arrays(batch, cfg.max_len)
            logits = model.forward(ids)
            loss, dlogits = softmax_xent(logits, targets, mask)
            grads = model.store.zero_grads()
            model.backward(dlogits, grads)
            adam_step(model.store, grads, cfg.lr)
            losses.append(loss)
        model.loss_curve.append(float(np.mean(losses)))
    return model
