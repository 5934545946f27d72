"""Minimal float64 tensor/backprop kernel shared by the generative models."""

from .core import ParamStore, adam_step, load_checkpoint, save_checkpoint
from .layers import (
    Conv1d,
    ConvTranspose1d,
    Dense,
    Embedding,
    Gelu,
    LayerNorm,
    LeakyRelu,
    MultiHeadSelfAttention,
    Relu,
    Sigmoid,
    sigmoid,
    softmax,
)
from .losses import bce_with_logits, softmax_xent

__all__ = [
    "Conv1d",
    "ConvTranspose1d",
    "Dense",
    "Embedding",
    "Gelu",
    "LayerNorm",
    "LeakyRelu",
    "MultiHeadSelfAttention",
    "ParamStore",
    "Relu",
    "Sigmoid",
    "adam_step",
    "bce_with_logits",
    "load_checkpoint",
    "save_checkpoint",
    "sigmoid",
    "softmax",
    "softmax_xent",
]
