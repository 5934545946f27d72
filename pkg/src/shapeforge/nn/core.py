"""Parameter storage, adaptive-moment optimization, and checkpoints.

Everything runs in float64 with a seeded generator so training trajectories
are bitwise reproducible. A ParamStore owns named parameter tensors plus
their optimizer moments; layers register parameters at construction and
reference them by name.
"""

from __future__ import annotations

import base64
import json
import math
from typing import Optional

import numpy as np


class ParamStore:
    def __init__(self, seed: int):
        self.seed = int(seed)
        self.rng = np.random.default_rng(self.seed)
        self.params: dict[str, np.ndarray] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, value: np.ndarray) -> str:
        if name in self.params:
            raise ValueError(f"duplicate parameter {name!r}")
        arr = np.asarray(value, dtype=np.float64)
        self.params[name] = arr
        self.m[name] = np.zeros_like(arr)
        self.v[name] = np.zeros_like(arr)
        return name

    def init_zeros(self, name: str, shape: tuple[int, ...]) -> str:
        return self.add(name, np.zeros(shape))

    def init_uniform(self, name: str, shape: tuple[int, ...], scale: float) -> str:
        return self.add(name, self.rng.uniform(-scale, scale, size=shape))

    def init_glorot(self, name: str, shape: tuple[int, ...], fan_in: int, fan_out: int) -> str:
        scale = math.sqrt(6.0 / (fan_in + fan_out))
        return self.init_uniform(name, shape, scale)

    def init_normal(self, name: str, shape: tuple[int, ...], std: float) -> str:
        return self.add(name, self.rng.normal(0.0, std, size=shape))

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(p) for name, p in self.params.items()}

    def clone(self) -> "ParamStore":
        out = ParamStore(self.seed)
        out.rng = np.random.default_rng(self.seed)  # fresh stream; params copied
        for name, p in self.params.items():
            out.params[name] = p.copy()
            out.m[name] = self.m[name].copy()
            out.v[name] = self.v[name].copy()
        out.step_count = self.step_count
        return out


def adam_step(
    store: ParamStore,
    grads: dict[str, np.ndarray],
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected adaptive-moment update, in parameter insertion order."""
    if set(grads.keys()) != set(store.params.keys()):
        missing = set(store.params) - set(grads)
        extra = set(grads) - set(store.params)
        raise KeyError(f"gradient keys mismatch (missing={sorted(missing)}, extra={sorted(extra)})")
    store.step_count += 1
    t = store.step_count
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name in store.params:
        grad = grads[name]
        m = store.m[name]
        v = store.v[name]
        m *= beta1
        m += (1.0 - beta1) * grad
        v *= beta2
        v += (1.0 - beta2) * grad * grad
        store.params[name] -= lr * (m / c1) / (np.sqrt(v / c2) + eps)


# ---------------------------------------------------------------------------
# checkpoint format: versioned JSON with base64 little-endian float64 arrays

CHECKPOINT_FORMAT = "shapeforge-checkpoint"
CHECKPOINT_VERSION = 1


def _encode_array(arr: np.ndarray) -> dict:
    data = np.ascontiguousarray(arr, dtype="<f8")
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(data.tobytes()).decode("ascii"),
    }


def _decode_array(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype="<f8").reshape(d["shape"]).astype(np.float64)


def save_checkpoint(path, store: ParamStore, meta: Optional[dict] = None) -> None:
    doc = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "seed": store.seed,
        "step": store.step_count,
        "params": {k: _encode_array(v) for k, v in store.params.items()},
        "m": {k: _encode_array(v) for k, v in store.m.items()},
        "v": {k: _encode_array(v) for k, v in store.v.items()},
        "meta": meta or {},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))


def load_checkpoint(path) -> tuple[ParamStore, dict]:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"not a checkpoint file: {path}")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    store = ParamStore(int(doc["seed"]))
    for name, enc in doc["params"].items():
        store.params[name] = _decode_array(enc)
        store.m[name] = _decode_array(doc["m"][name])
        store.v[name] = _decode_array(doc["v"][name])
    store.step_count = int(doc["step"])
    return store, doc.get("meta", {})
