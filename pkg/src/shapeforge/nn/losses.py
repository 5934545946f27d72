"""Training losses. Each returns (scalar loss, gradient w.r.t. logits)."""

from __future__ import annotations

import numpy as np

from .layers import sigmoid, softmax


def bce_with_logits(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean binary cross-entropy on raw logits (numerically stable)."""
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    loss = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    n = z.size
    dz = (sigmoid(z) - y) / n
    return float(loss.mean()), dz


def softmax_xent(
    logits: np.ndarray, targets: np.ndarray, mask: np.ndarray
) -> tuple[float, np.ndarray]:
    """Next-token cross-entropy over masked positions.

    logits (B, T, V), integer targets (B, T), mask (B, T) selecting the
    positions that contribute; the mean is over selected positions.
    """
    b, t, v = logits.shape
    m = np.asarray(mask, dtype=np.float64)
    total = m.sum()
    if total == 0:
        return 0.0, np.zeros_like(logits)
    z = logits - logits.max(axis=-1, keepdims=True)
    logsumexp = np.log(np.exp(z).sum(axis=-1))
    picked = np.take_along_axis(z, targets[..., None], axis=-1)[..., 0]
    loss = ((logsumexp - picked) * m).sum() / total
    probs = softmax(logits)
    onehot = np.zeros_like(logits)
    np.put_along_axis(onehot, targets[..., None], 1.0, axis=-1)
    dz = (probs - onehot) * (m[..., None] / total)
    return float(loss), dz
