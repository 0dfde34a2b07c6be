"""From-scratch dense network parts: layers, losses, Adam, checkpoints."""

from .checkpoint import load_checkpoint, save_checkpoint
from .layers import (
    BatchNorm,
    Dropout,
    FeedForwardBlock,
    GatedActivation,
    Layer,
    Linear,
    Param,
    ReLU,
    Sigmoid,
    sigmoid,
)
from .losses import bce_with_logits, cosine_similarity, ic_loss
from .optim import Adam

__all__ = [
    "Adam",
    "BatchNorm",
    "Dropout",
    "FeedForwardBlock",
    "GatedActivation",
    "Layer",
    "Linear",
    "Param",
    "ReLU",
    "Sigmoid",
    "bce_with_logits",
    "cosine_similarity",
    "ic_loss",
    "load_checkpoint",
    "save_checkpoint",
    "sigmoid",
]
