"""Loss primitives returning scalar tensors."""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError, LabelError
from .ops import sigmoid
from .tensor import Tensor, record


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean over the batch of ``-log softmax(logits)[label]``.

    Args:
        logits: Raw scores of shape [N, K].
        labels: Integer class indices of shape [N], each in [0, K).

    Returns:
        Scalar loss tensor.
    """
    labels = np.asarray(labels)
    if logits.data.ndim != 2:
        raise DimensionError(f"logits must be [N,K], got shape {logits.shape}")
    n, k = logits.shape
    if labels.shape != (n,):
        raise DimensionError(f"labels must have shape ({n},), got {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer) or labels.min() < 0 or labels.max() >= k:
        raise LabelError(f"labels must be integers in [0, {k}), got range [{labels.min()}, {labels.max()}]")

    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    rows = np.arange(n)
    loss = np.mean(lse - z[rows, labels])

    def backward(g: np.ndarray):
        probs = np.exp(z - lse[:, None])
        probs[rows, labels] -= 1.0
        return (probs * (g / n),)

    return record("softmax_cross_entropy", (logits,), Tensor(np.asarray(loss, dtype=logits.dtype)), backward)


def sigmoid_binary_cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean over all N*B bins of the binary cross-entropy on ``sigmoid(logits)``.

    Uses the stable form ``max(z, 0) - z*t + log(1 + exp(-|z|))``.
    """
    targets = np.asarray(targets)
    if logits.data.ndim != 2:
        raise DimensionError(f"logits must be [N,B], got shape {logits.shape}")
    if targets.shape != logits.shape:
        raise DimensionError(f"targets shape {targets.shape} differs from logits shape {logits.shape}")
    if not np.all((targets == 0) | (targets == 1)):
        raise LabelError("sigmoid_binary_cross_entropy targets must be 0 or 1")

    z = logits.data
    t = targets.astype(z.dtype)
    count = z.size
    loss = np.mean(np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z))))

    def backward(g: np.ndarray):
        return ((sigmoid(z) - t) * (g / count),)

    return record(
        "sigmoid_binary_cross_entropy", (logits,), Tensor(np.asarray(loss, dtype=logits.dtype)), backward
    )
