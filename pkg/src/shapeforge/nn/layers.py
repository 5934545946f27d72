"""Differentiable layers over float64 numpy arrays.

Each layer registers its parameters in a ParamStore at construction and
keeps forward activations on the instance, so one layer instance serves one
training worker at a time. ``backward`` consumes the upstream gradient,
accumulates parameter gradients into the supplied dict, and returns the
input gradient.
"""

from __future__ import annotations

import math

import numpy as np

from .core import ParamStore


class Dense:
    """Affine map on the last axis: (..., n_in) -> (..., n_out)."""

    def __init__(self, store: ParamStore, name: str, n_in: int, n_out: int):
        self.w = store.init_glorot(f"{name}.w", (n_in, n_out), n_in, n_out)
        self.b = store.init_zeros(f"{name}.b", (n_out,))
        self.store = store
        self.n_in = n_in

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return x @ self.store.params[self.w] + self.store.params[self.b]

    def backward(self, dy: np.ndarray, grads: dict) -> np.ndarray:
        x2 = self._x.reshape(-1, self.n_in)
        dy2 = dy.reshape(-1, dy.shape[-1])
        grads[self.w] += x2.T @ dy2
        grads[self.b] += dy2.sum(axis=0)
        return (dy2 @ self.store.params[self.w].T).reshape(self._x.shape)


class Embedding:
    """Token id lookup: int (...,) -> (..., dim)."""

    def __init__(self, store: ParamStore, name: str, vocab: int, dim: int, std: float = 0.05):
        self.w = store.init_normal(name, (vocab, dim), std)
        self.store = store
        self.dim = dim

    def forward(self, ids: np.ndarray) -> np.ndarray:
        self._ids = np.asarray(ids)
        return self.store.params[self.w][self._ids]

    def backward(self, dy: np.ndarray, grads: dict) -> None:
        flat_ids = self._ids.reshape(-1)
        np.add.at(grads[self.w], flat_ids, dy.reshape(-1, self.dim))
        return None


class LayerNorm:
    """Normalization over the last axis with learned gain and bias."""

    def __init__(self, store: ParamStore, name: str, dim: int, eps: float = 1e-6):
        self.g = store.add(f"{name}.g", np.ones(dim))
        self.b = store.init_zeros(f"{name}.b", (dim,))
        self.store = store
        self.eps = eps

    def forward(self, x: np.ndarray) -> np.ndarray:
        mu = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        self._inv = 1.0 / np.sqrt(var + self.eps)
        self._xhat = (x - mu) * self._inv
        return self.store.params[self.g] * self._xhat + self.store.params[self.b]

    def backward(self, dy: np.ndarray, grads: dict) -> np.ndarray:
        xhat, inv = self._xhat, self._inv
        axes = tuple(range(dy.ndim - 1))
        grads[self.g] += (dy * xhat).sum(axis=axes)
        grads[self.b] += dy.sum(axis=axes)
        dxhat = dy * self.store.params[self.g]
        mean1 = dxhat.mean(axis=-1, keepdims=True)
        mean2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        return inv * (dxhat - mean1 - xhat * mean2)


class Conv1d:
    """Cross-correlation along the middle axis: (B, T, Cin) -> (B, T', Cout)."""

    def __init__(
        self,
        store: ParamStore,
        name: str,
        c_in: int,
        c_out: int,
        kernel: int,
        stride: int = 1,
        pad: int = 0,
    ):
        fan_in = kernel * c_in
        self.w = store.init_glorot(f"{name}.w", (kernel, c_in, c_out), fan_in, c_out)
        self.b = store.init_zeros(f"{name}.b", (c_out,))
        self.store = store
        self.kernel, self.stride, self.pad = kernel, stride, pad
        self.c_in = c_in

    def out_len(self, t: int) -> int:
        return (t + 2 * self.pad - self.kernel) // self.stride + 1

    def forward(self, x: np.ndarray) -> np.ndarray:
        b, t, _ = x.shape
        t_out = self.out_len(t)
        xp = np.pad(x, ((0, 0), (self.pad, self.pad), (0, 0)))
        idx = self.stride * np.arange(t_out)[:, None] + np.arange(self.kernel)[None, :]
        self._patches = xp[:, idx, :]  # (B, T_out, K, Cin)
        self._t_in = t
        y = np.tensordot(self._patches, self.store.params[self.w], axes=([2, 3], [0, 1]))
        return y + self.store.params[self.b]

    def backward(self, dy: np.ndarray, grads: dict) -> np.ndarray:
        b, t_out, _ = dy.shape
        grads[self.w] += np.tensordot(self._patches, dy, axes=([0, 1], [0, 1]))
        grads[self.b] += dy.sum(axis=(0, 1))
        dpatches = np.tensordot(dy, self.store.params[self.w], axes=([2], [2]))
        dxp = np.zeros((b, self._t_in + 2 * self.pad, self.c_in))
        idx = self.stride * np.arange(t_out)[:, None] + np.arange(self.kernel)[None, :]
        np.add.at(dxp, (slice(None), idx), dpatches)
        return dxp[:, self.pad : self.pad + self._t_in, :]


class ConvTranspose1d:
    """Strided upsampling convolution: (B, T, Cin) -> (B, (T-1)*s - 2p + K, Cout)."""

    def __init__(
        self,
        store: ParamStore,
        name: str,
        c_in: int,
        c_out: int,
        kernel: int,
        stride: int = 1,
        pad: int = 0,
    ):
        fan_in = kernel * c_in
        self.w = store.init_glorot(f"{name}.w", (kernel, c_in, c_out), fan_in, c_out)
        self.b = store.init_zeros(f"{name}.b", (c_out,))
        self.store = store
        self.kernel, self.stride, self.pad = kernel, stride, pad
        self.c_in = c_in
        self.c_out = c_out

    def out_len(self, t: int) -> int:
        return (t - 1) * self.stride - 2 * self.pad + self.kernel

    def forward(self, x: np.ndarray) -> np.ndarray:
        b, t, _ = x.shape
        self._x = x
        full = (t - 1) * self.stride + self.kernel
        w = self.store.params[self.w]
        y_full = np.zeros((b, full, self.c_out))
        for k in range(self.kernel):
            y_full[:, k : k + self.stride * t : self.stride, :] += x @ w[k]
        t_out = self.out_len(t)
        return y_full[:, self.pad : self.pad + t_out, :] + self.store.params[self.b]

    def backward(self, dy: np.ndarray, grads: dict) -> np.ndarray:
        x = self._x
        b, t, _ = x.shape
        full = (t - 1) * self.stride + self.kernel
        dy_full = np.zeros((b, full, self.c_out))
        t_out = self.out_len(t)
        dy_full[:, self.pad : self.pad + t_out, :] = dy
        w = self.store.params[self.w]
        dx = np.zeros_like(x)
        for k in range(self.kernel):
            sl = dy_full[:, k : k + self.stride * t : self.stride, :]
            dx += sl @ w[k].T
            grads[self.w][k] += np.tensordot(x, sl, axes=([0, 1], [0, 1]))
        grads[self.b] += dy.sum(axis=(0, 1))
        return dx


class MultiHeadSelfAttention:
    """Scaled dot-product self-attention with an optional causal mask."""

    def __init__(self, store: ParamStore, name: str, dim: int, heads: int, causal: bool = True):
        if dim % heads != 0:
            raise ValueError("dim must divide evenly into heads")
        self.q = Dense(store, f"{name}.q", dim, dim)
        self.k = Dense(store, f"{name}.k", dim, dim)
        self.v = Dense(store, f"{name}.v", dim, dim)
        self.o = Dense(store, f"{name}.o", dim, dim)
        self.heads = heads
        self.hd = dim // heads
        self.causal = causal

    def _split(self, x: np.ndarray) -> np.ndarray:
        b, t, _ = x.shape
        return x.reshape(b, t, self.heads, self.hd).transpose(0, 2, 1, 3)

    def _merge(self, x: np.ndarray) -> np.ndarray:
        b, h, t, hd = x.shape
        return x.transpose(0, 2, 1, 3).reshape(b, t, h * hd)

    def forward(self, x: np.ndarray) -> np.ndarray:
        b, t, _ = x.shape
        q = self._split(self.q.forward(x))
        k = self._split(self.k.forward(x))
        v = self._split(self.v.forward(x))
        scores = q @ k.transpose(0, 1, 3, 2) / math.sqrt(self.hd)
        if self.causal:
            mask = np.triu(np.ones((t, t), dtype=bool), k=1)
            scores = np.where(mask, -np.inf, scores)
        scores -= scores.max(axis=-1, keepdims=True)
        ex = np.exp(scores)
        attn = ex / ex.sum(axis=-1, keepdims=True)
        self._q, self._k, self._v, self._attn = q, k, v, attn
        return self.o.forward(self._merge(attn @ v))

    def backward(self, dy: np.ndarray, grads: dict) -> np.ndarray:
        dctx = self._split(self.o.backward(dy, grads))
        attn, q, k, v = self._attn, self._q, self._k, self._v
        dattn = dctx @ v.transpose(0, 1, 3, 2)
        dv = attn.transpose(0, 1, 3, 2) @ dctx
        # softmax backward: dS = A * (dA - sum(dA * A))
        dscores = attn * (dattn - (dattn * attn).sum(axis=-1, keepdims=True))
        dscores /= math.sqrt(self.hd)
        dq = dscores @ k
        dk = dscores.transpose(0, 1, 3, 2) @ q
        dx = self.q.backward(self._merge(dq), grads)
        dx += self.k.backward(self._merge(dk), grads)
        dx += self.v.backward(self._merge(dv), grads)
        return dx


# ---------------------------------------------------------------------------
# activations (stateful caches, parameter-free)


class Relu:
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return np.where(self._mask, dy, 0.0)


class LeakyRelu:
    def __init__(self, slope: float = 0.2):
        self.slope = slope

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._mask = x > 0
        return np.where(self._mask, x, self.slope * x)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return np.where(self._mask, dy, self.slope * dy)


class Sigmoid:
    def forward(self, x: np.ndarray) -> np.ndarray:
        self._y = sigmoid(x)
        return self._y

    def backward(self, dy: np.ndarray) -> np.ndarray:
        return dy * self._y * (1.0 - self._y)


_GELU_C = math.sqrt(2.0 / math.pi)


class Gelu:
    """tanh-approximated gaussian error linear unit (smooth, FD-checkable)."""

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        self._t = np.tanh(_GELU_C * (x + 0.044715 * x**3))
        return 0.5 * x * (1.0 + self._t)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        x, t = self._x, self._t
        dt = (1.0 - t * t) * _GELU_C * (1.0 + 3 * 0.044715 * x * x)
        return dy * (0.5 * (1.0 + t) + 0.5 * x * dt)


def sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x, dtype=np.float64)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    z = x - x.max(axis=axis, keepdims=True)
    ex = np.exp(z)
    return ex / ex.sum(axis=axis, keepdims=True)
