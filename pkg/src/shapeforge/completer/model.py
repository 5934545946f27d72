"""Decoder-only attention model over rule-sequence tokens."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from ..nn.core import (
    CHECKPOINT_FORMAT,
    CHECKPOINT_VERSION,
    ParamStore,
    _decode_array,
    _encode_array,
)
from ..nn.layers import Dense, Embedding, Gelu, LayerNorm, MultiHeadSelfAttention
from .vocab import TokenVocab


@dataclass(frozen=True)
class CompleterConfig:
    model_dim: int = 32
    heads: int = 2
    blocks: int = 2
    ff_dim: int = 64
    max_len: int = 160
    lr: float = 3e-3
    batch: int = 32
    epochs: int = 30
    seed: int = 0

    def to_dict(self) -> dict:
        return {
            "modelDim": self.model_dim,
            "heads": self.heads,
            "blocks": self.blocks,
            "ffDim": self.ff_dim,
            "maxLen": self.max_len,
            "lr": self.lr,
            "batch": self.batch,
            "epochs": self.epochs,
            "seed": self.seed,
        }

    @staticmethod
    def from_dict(d: dict) -> "CompleterConfig":
        return CompleterConfig(
            model_dim=int(d["modelDim"]),
            heads=int(d["heads"]),
            blocks=int(d["blocks"]),
            ff_dim=int(d["ffDim"]),
            max_len=int(d["maxLen"]),
            lr=float(d["lr"]),
            batch=int(d["batch"]),
            epochs=int(d["epochs"]),
            seed=int(d["seed"]),
        )


class _Block:
    def __init__(self, store: ParamStore, name: str, cfg: CompleterConfig):
        d = cfg.model_dim
        self.ln1 = LayerNorm(store, f"{name}.ln1", d)
        self.attn = MultiHeadSelfAttention(store, f"{name}.attn", d, cfg.heads, causal=True)
        self.ln2 = LayerNorm(store, f"{name}.ln2", d)
        self.fc1 = Dense(store, f"{name}.fc1", d, cfg.ff_dim)
        self.act = Gelu()
        self.fc2 = Dense(store, f"{name}.fc2", cfg.ff_dim, d)

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = x + self.attn.forward(self.ln1.forward(x))
        return x + self.fc2.forward(self.act.forward(self.fc1.forward(self.ln2.forward(x))))

    def backward(self, dy: np.ndarray, grads: dict) -> np.ndarray:
        dff = self.fc1.backward(self.act.backward(self.fc2.backward(dy, grads)), grads)
        dy = dy + self.ln2.backward(dff, grads)
        dattn = self.attn.backward(dy, grads)
        return dy + self.ln1.backward(dattn, grads)


@dataclass
class CompleterModel:
    config: CompleterConfig
    vocab: TokenVocab
    store: ParamStore
    tok_embed: Embedding
    pos_embed: Embedding
    blocks: list
    final_ln: LayerNorm
    head: Dense
    loss_curve: list = field(default_factory=list)

    @staticmethod
    def build(cfg: CompleterConfig, vocab: TokenVocab) -> "CompleterModel":
        store = ParamStore(cfg.seed)
        tok = Embedding(store, "tok", vocab.size, cfg.model_dim)
        pos = Embedding(store, "pos", cfg.max_len, cfg.model_dim)
        blocks = [_Block(store, f"blk{i}", cfg) for i in range(cfg.blocks)]
        ln = LayerNorm(store, "final_ln", cfg.model_dim)
        head = Dense(store, "head", cfg.model_dim, vocab.size)
        return CompleterModel(
            config=cfg,
            vocab=vocab,
            store=store,
            tok_embed=tok,
            pos_embed=pos,
            blocks=blocks,
            final_ln=ln,
            head=head,
        )

    def forward(self, ids: np.ndarray) -> np.ndarray:
        """Token ids (B, T) -> next-token logits (B, T, vocab)."""
        ids = np.asarray(ids)
        b, t = ids.shape
        if t > self.config.max_len:
            raise ValueError(f"sequence length {t} exceeds window {self.config.max_len}")
        x = self.tok_embed.forward(ids) + self.pos_embed.forward(
            np.broadcast_to(np.arange(t), (b, t))
        )
        for blk in self.blocks:
            x = blk.forward(x)
        return self.head.forward(self.final_ln.forward(x))

    def backward(self, dlogits: np.ndarray, grads: dict) -> None:
        dx = self.final_ln.backward(self.head.backward(dlogits, grads), grads)
        for blk in reversed(self.blocks):
            dx = blk.backward(dx, grads)
        self.tok_embed.backward(dx, grads)
        self.pos_embed.backward(dx, grads)

    def logits_last(self, ids: list[int]) -> np.ndarray:
        """Logits for the next token after a single sequence."""
        return self.forward(np.asarray(ids)[None, :])[0, -1]


def save_completer(path, model: CompleterModel) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "kind": "completer",
        "config": model.config.to_dict(),
        "vocab": model.vocab.to_dict(),
        "seed": model.store.seed,
        "step": model.store.step_count,
        "params": {k: _encode_array(v) for k, v in model.store.params.items()},
        "m": {k: _encode_array(v) for k, v in model.store.m.items()},
        "v": {k: _encode_array(v) for k, v in model.store.v.items()},
        "lossCurve": model.loss_curve,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))


def load_completer(path) -> CompleterModel:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT or doc.get("kind") != "completer":
        raise ValueError(f"not a completer checkpoint: {path}")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    model = CompleterModel.build(
        CompleterConfig.from_dict(doc["config"]), TokenVocab.from_dict(doc["vocab"])
    )
    for name, enc in doc["params"].items():
        model.store.params[name] = _decode_array(enc)
        model.store.m[name] = _decode_array(doc["m"][name])
        model.store.v[name] = _decode_array(doc["v"][name])
    model.store.step_count = int(doc["step"])
    model.loss_curve = doc.get("lossCurve", [])
    return model
