"""Reverse-mode autodiff core.

Modules:
- tensor: Tensor, Tape and op recording
- ops: conv2d, maxpool2, leaky_relu, fully_connected, dropout and friends
- losses: softmax cross-entropy and sigmoid binary cross-entropy
- init: Xavier initialisation
- optim: Adam
- rng: counter-based random streams
- checkpoint: the ADNETCK1 tensor file format
"""

from __future__ import annotations

from .checkpoint import load_checkpoint, save_checkpoint
from .init import constant, fans, xavier_bound, xavier_init, zeros
from .losses import sigmoid_binary_cross_entropy, softmax_cross_entropy
from .ops import (
    CONV_METHODS,
    add,
    channel_mix,
    conv2d,
    dropout,
    flatten,
    fully_connected,
    leaky_relu,
    maxpool2,
    scale_add,
    sigmoid,
    softmax,
)
from .optim import AdamState, adam_step
from .rng import RngStream
from .tensor import Node, Tape, Tensor, active_tape, record

__all__ = [
    "CONV_METHODS",
    "AdamState",
    "Node",
    "RngStream",
    "Tape",
    "Tensor",
    "active_tape",
    "adam_step",
    "add",
    "channel_mix",
    "constant",
    "conv2d",
    "dropout",
    "fans",
    "flatten",
    "fully_connected",
    "leaky_relu",
    "load_checkpoint",
    "maxpool2",
    "record",
    "save_checkpoint",
    "scale_add",
    "sigmoid",
    "sigmoid_binary_cross_entropy",
    "softmax",
    "softmax_cross_entropy",
    "xavier_bound",
    "xavier_init",
    "zeros",
]
