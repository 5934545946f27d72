"""Conditional convolutional GAN for design corpus expansion.

The generator maps noise concatenated with a shape-type one-hot through a
dense stage and two strided transposed convolutions along the rule-sequence
axis to an M_max x D matrix with a sigmoid head, matching the embedding
domain. The discriminator sees the matrix with the label broadcast as extra
channels and applies two strided convolutions plus a dense head to a
real-probability logit. Training alternates discriminator and generator
steps with the non-saturating generator loss.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
import numpy as np

from .nn.core import ParamStore, adam_step
from .nn.layers import Conv1d, ConvTranspose1d, Dense, LeakyRelu, Relu, sigmoid
from .nn.losses import bce_with_logits
from .vecspace import EmbeddedSequence, SpaceConfig


@dataclass(frozen=True)
class GanConfig:
    noise_dim: int = 16
    gen_channels: tuple[int, int] = (32, 16)
    disc_channels: tuple[int, int] = (16, 32)
    # repeating the label one-hot widens the conditioning pathway; without it
    # the generator tends to collapse onto a single shape type
    label_repeat: int = 4
    lr: float = 1e-3
    # two-timescale rule: the discriminator trains slower so the generator
    # keeps a usable gradient signal
    d_lr_scale: float = 0.25
    # L2 pull on generator pre-sigmoid outputs; keeps the sigmoid head out
    # of saturation, where adversarial gradients die
    logit_reg: float = 0.1
    # averaged generator weights smooth out adversarial oscillation
    ema: float = 0.995
    # linear lr decay to this floor fraction settles the game late in training
    lr_floor: float = 0.02
    batch: int = 32
    epochs: int = 150
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "noiseDim": self.noise_dim,
            "genChannels": list(self.gen_channels),
            "discChannels": list(self.disc_channels),
            "labelRepeat": self.label_repeat,
            "lr": self.lr,
            "dLrScale": self.d_lr_scale,
            "logitReg": self.logit_reg,
            "ema": self.ema,
            "lrFloor": self.lr_floor,
            "batch": self.batch,
            "epochs": self.epochs,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "GanConfig":
        return GanConfig(
            noise_dim=int(d["noiseDim"]),
            gen_channels=tuple(d["genChannels"]),
            disc_channels=tuple(d["discChannels"]),
            label_repeat=int(d["labelRepeat"]),
            lr=float(d["lr"]),
            d_lr_scale=float(d["dLrScale"]),
            logit_reg=float(d["logitReg"]),
            ema=float(d["ema"]),
            lr_floor=float(d["lrFloor"]),
            batch=int(d["batch"]),
            epochs=int(d["epochs"]),
            seed=int(d["seed"]),
        )


class _Generator:
    def __init__(self, store: ParamStore, cfg: GanConfig, space: SpaceConfig, label_dim: int):
        if space.max_rules % 4 != 0:
            raise ValueError("max_rules must be divisible by 4 for the conv stack")
        self.t0 = space.max_rules // 4
        c0, c1 = cfg.gen_channels
        self.c0 = c0
        self.fc = Dense(store, "gen.fc", cfg.noise_dim + label_dim, self.t0 * c0)
        self.act0 = Relu()
        self.up1 = ConvTranspose1d(store, "gen.up1", c0, c1, kernel=4, stride=2, pad=1)
        self.act1 = Relu()
        self.up2 = ConvTranspose1d(store, "gen.up2", c1, space.row_width, kernel=4, stride=2, pad=1)

    def forward(self, z: np.ndarray, labels: np.ndarray) -> np.ndarray:
        h = self.act0.forward(self.fc.forward(np.concatenate([z, labels], axis=1)))
        h = h.reshape(h.shape[0], self.t0, self.c0)
        h = self.act1.forward(self.up1.forward(h))
        self._logits = self.up2.forward(h)
        self._out = sigmoid(self._logits)
        return self._out

    def backward(self, dout: np.ndarray, grads: dict, logit_reg: float = 0.0) -> None:
        dlogits = dout * self._out * (1.0 - self._out)
        if logit_reg:
            dlogits = dlogits + (2.0 * logit_reg / self._logits.size) * self._logits
        dh = self.up2.backward(dlogits, grads)
        dh = self.up1.backward(self.act1.backward(dh), grads)
        dh = dh.reshape(dh.shape[0], -1)
        self.fc.backward(self.act0.backward(dh), grads)


class _Discriminator:
    def __init__(self, store: ParamStore, cfg: GanConfig, space: SpaceConfig, label_dim: int):
        c0, c1 = cfg.disc_channels
        self.conv1 = Conv1d(store, "disc.conv1", space.row_width + label_dim, c0, kernel=4, stride=2, pad=1)
        self.act1 = LeakyRelu(0.2)
        self.conv2 = Conv1d(store, "disc.conv2", c0, c1, kernel=4, stride=2, pad=1)
        self.act2 = LeakyRelu(0.2)
        self.flat_dim = (space.max_rules // 4) * c1
        self.fc = Dense(store, "disc.fc", self.flat_dim, 1)
        self.label_dim = label_dim

    def forward(self, matrices: np.ndarray, labels: np.ndarray) -> np.ndarray:
        b, t, _ = matrices.shape
        lab = np.broadcast_to(labels[:, None, :], (b, t, self.label_dim))
        x = np.concatenate([matrices, lab], axis=2)
        h = self.act1.forward(self.conv1.forward(x))
        h = self.act2.forward(self.conv2.forward(h))
        self._h_shape = h.shape
        return self.fc.forward(h.reshape(b, -1))[:, 0]

    def backward(self, dlogit: np.ndarray, grads: dict) -> np.ndarray:
        """Returns gradient w.r.t. the matrix input (label channels dropped)."""
        dh = self.fc.backward(dlogit[:, None], grads).reshape(self._h_shape)
        dh = self.conv2.backward(self.act2.backward(dh), grads)
        dx = self.conv1.backward(self.act1.backward(dh), grads)
        return dx[:, :, : -self.label_dim] if self.label_dim else dx


@dataclass
class GanModel:
    config: GanConfig
    space: SpaceConfig
    labels: tuple[str, ...]
    g_store: ParamStore
    d_store: ParamStore
    generator: _Generator
    discriminator: _Discriminator
    loss_history: list = field(default_factory=list)

    @staticmethod
    def build(cfg: GanConfig, space: SpaceConfig, labels: tuple[str, ...]) -> "GanModel":
        g_store = ParamStore(cfg.seed)
        d_store = ParamStore(cfg.seed + 1)
        width = len(labels) * cfg.label_repeat
        return GanModel(
            config=cfg,
            space=space,
            labels=tuple(labels),
            g_store=g_store,
            d_store=d_store,
            generator=_Generator(g_store, cfg, space, width),
            discriminator=_Discriminator(d_store, cfg, space, width),
        )

    def label_onehot(self, label: str) -> np.ndarray:
        if label not in self.labels:
            raise ValueError(f"unknown label {label!r}")
        vec = np.zeros(len(self.labels))
        vec[self.labels.index(label)] = 1.0
        return np.tile(vec, self.config.label_repeat)

    def generate(self, z: np.ndarray, labels: np.ndarray) -> np.ndarray:
        return self.generator.forward(z, labels)

    def discriminator_step(
        self,
        real: np.ndarray,
        real_labels: np.ndarray,
        fake: np.ndarray,
        fake_labels: np.ndarray,
        lr: float,
    ) -> float:
        grads = self.d_store.zero_grads()
        logits_real = self.discriminator.forward(real, real_labels)
        loss_real, dz_real = bce_with_logits(logits_real, np.ones_like(logits_real))
        self.discriminator.backward(dz_real, grads)
        logits_fake = self.discriminator.forward(fake, fake_labels)
        loss_fake, dz_fake = bce_with_logits(logits_fake, np.zeros_like(logits_fake))
        self.discriminator.backward(dz_fake, grads)
        adam_step(self.d_store, grads, lr)
        return loss_real + loss_fake

    def generator_step(self, labels: np.ndarray, rng: np.random.Generator, lr: float) -> float:
        z = rng.standard_normal((labels.shape[0], self.config.noise_dim))
        fake = self.generator.forward(z, labels)
        logits = self.discriminator.forward(fake, labels)
        # non-saturating loss: push D(fake) toward "real"
        loss, dz = bce_with_logits(logits, np.ones_like(logits))
        d_grads = self.d_store.zero_grads()  # discarded; D is frozen here
        dfake = self.discriminator.backward(dz, d_grads)
        g_grads = self.g_store.zero_grads()
        self.generator.backward(dfake, g_grads, logit_reg=self.config.logit_reg)
        adam_step(self.g_store, g_grads, lr)
        return loss


def train_gan(
    dataset: list[EmbeddedSequence],
    cfg: GanConfig,
    space: SpaceConfig,
    labels: tuple[str, ...],
) -> GanModel:
    """Alternating adversarial training; deterministic for a fixed seed."""
    if not dataset:
        raise ValueError("empty dataset")
    for e in dataset:
        if e.matrix.shape != (space.max_rules, space.row_width):
            raise ValueError(
                f"record shape {e.matrix.shape} does not match space "
                f"({space.max_rules}, {space.row_width})"
            )
        if e.label not in labels:
            raise ValueError(f"record label {e.label!r} not in {labels}")

    model = GanModel.build(cfg, space, labels)
    rng = np.random.default_rng(cfg.seed)
    matrices = np.stack([e.matrix for e in dataset])
    onehots = np.stack([model.label_onehot(e.label) for e in dataset])
    n = len(dataset)

    ema = {k: v.copy() for k, v in model.g_store.params.items()}
    for epoch in range(cfg.epochs):
        # linear decay settles the adversarial game late in training
        scale = max(cfg.lr_floor, 1.0 - epoch / cfg.epochs)
        g_lr = cfg.lr * scale
        d_lr = g_lr * cfg.d_lr_scale
        order = rng.permutation(n)
        d_losses, g_losses = [], []
        for start in range(0, n, cfg.batch):
            idx = order[start : start + cfg.batch]
            real = matrices[idx]
            real_labels = onehots[idx]
            z = rng.standard_normal((len(idx), cfg.noise_dim))
            fake = model.generate(z, real_labels)
            d_losses.append(
                model.discriminator_step(real, real_labels, fake, real_labels, d_lr)
            )
            g_losses.append(model.generator_step(real_labels, rng, g_lr))
            for k in ema:
                ema[k] = cfg.ema * ema[k] + (1.0 - cfg.ema) * model.g_store.params[k]
        model.loss_history.append(
            {"d": float(np.mean(d_losses)), "g": float(np.mean(g_losses))}
        )
    if cfg.epochs > 0:
        model.g_store.params.update(ema)
    return model


def sample(model: GanModel, label: str, n: int, seed: int) -> list[EmbeddedSequence]:
    """n generated embeddings carrying the requested shape-type label."""
    onehot = model.label_onehot(label)  # raises on unknown label
    if n == 0:
        return []
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((n, model.config.noise_dim))
    labels = np.tile(onehot, (n, 1))
    out = model.generate(z, labels)
    hosts = (-1,) * model.space.max_rules
    return [
        EmbeddedSequence(matrix=out[i], label=label, host_indices=hosts, provenance="generated")
        for i in range(n)
    ]


def discriminate(model: GanModel, e: EmbeddedSequence) -> float:
    """Probability the discriminator assigns to an embedding being real."""
    if e.matrix.shape != (model.space.max_rules, model.space.row_width):
        raise ValueError("embedding shape does not match model space")
    logit = model.discriminator.forward(
        e.matrix[None, :, :], model.label_onehot(e.label)[None, :]
    )
    return float(sigmoid(logit)[0])


# ---------------------------------------------------------------------------
# persistence

from .nn.core import (  # noqa: E402  (kept together with model I/O)
    CHECKPOINT_FORMAT,
    CHECKPOINT_VERSION,
    _decode_array,
    _encode_array,
)


def _store_doc(store: ParamStore) -> dict:
    return {
        "seed": store.seed,
        "step": store.step_count,
        "params": {k: _encode_array(v) for k, v in store.params.items()},
        "m": {k: _encode_array(v) for k, v in store.m.items()},
        "v": {k: _encode_array(v) for k, v in store.v.items()},
    }


def _load_store_into(store: ParamStore, doc: dict) -> None:
    for name, enc in doc["params"].items():
        store.params[name] = _decode_array(enc)
        store.m[name] = _decode_array(doc["m"][name])
        store.v[name] = _decode_array(doc["v"][name])
    store.step_count = int(doc["step"])


def save_gan(path, model: GanModel) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "kind": "gan",
        "config": model.config.to_dict(),
        "space": model.space.to_dict(),
        "labels": list(model.labels),
        "generator": _store_doc(model.g_store),
        "discriminator": _store_doc(model.d_store),
        "lossHistory": model.loss_history,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))


def load_gan(path) -> GanModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("kind") != "gan":
        raise ValueError(f"not a GAN checkpoint: {path}")
    model = GanModel.build(
        GanConfig.from_dict(doc["config"]),
        SpaceConfig.from_dict(doc["space"]),
        tuple(doc["labels"]),
    )
    _load_store_into(model.g_store, doc["generator"])
    _load_store_into(model.d_store, doc["discriminator"])
    model.loss_history = doc.get("lossHistory", [])
    return model
