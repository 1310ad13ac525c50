"""Gradient checks for every differentiable primitive and both losses."""

from __future__ import annotations

from typing import Callable

import numpy as np

from ..core import (
    RngStream,
    Tensor,
    add,
    channel_mix,
    conv2d,
    dropout,
    flatten,
    fully_connected,
    leaky_relu,
    maxpool2,
    scale_add,
    sigmoid_binary_cross_entropy,
    softmax_cross_entropy,
)
from .base import GradCheck, project


def _tensor(rng: RngStream, label: str, shape: tuple[int, ...], dtype: np.dtype, scale: float = 1.0) -> Tensor:
    data = rng.split(label).uniform(-scale, scale, shape).astype(dtype)
    return Tensor(data, requires_grad=True, name=label)


def _weights(rng: RngStream, shape: tuple[int, ...], dtype: np.dtype) -> np.ndarray:
    return rng.split("projection").normal(0.0, 1.0, shape).astype(dtype)


def _unary(op: Callable[[Tensor], Tensor], shape: tuple[int, ...], out_shape: tuple[int, ...]):
    def build(rng: RngStream, dtype: np.dtype):
        x = _tensor(rng, "x", shape, dtype)
        w = _weights(rng, out_shape, dtype)
        return {"x": x}, lambda: project(op(x), w)

    return build


def _conv(method: str):
    def build(rng: RngStream, dtype: np.dtype):
        x = _tensor(rng, "x", (2, 3, 5, 6), dtype)
        k = _tensor(rng, "kernels", (4, 3, 3, 3), dtype, scale=0.5)
        b = _tensor(rng, "bias", (4,), dtype)
        w = _weights(rng, (2, 4, 5, 6), dtype)
        return {"x": x, "kernels": k, "bias": b}, lambda: project(conv2d(x, k, b, method=method), w)

    return build


def _fully_connected(rng: RngStream, dtype: np.dtype):
    x = _tensor(rng, "x", (3, 5), dtype)
    weights = _tensor(rng, "weights", (5, 4), dtype)
    bias = _tensor(rng, "bias", (4,), dtype)
    w = _weights(rng, (3, 4), dtype)
    return {"x": x, "weights": weights, "bias": bias}, lambda: project(fully_connected(x, weights, bias), w)


def _dropout(rng: RngStream, dtype: np.dtype):
    x = _tensor(rng, "x", (4, 6), dtype)
    w = _weights(rng, (4, 6), dtype)
    # a fresh stream per call keeps the mask fixed across perturbations
    return {"x": x}, lambda: project(dropout(x, 0.5, True, RngStream(11)), w)


def _add(rng: RngStream, dtype: np.dtype):
    a = _tensor(rng, "a", (2, 3, 4), dtype)
    b = _tensor(rng, "b", (2, 3, 4), dtype)
    w = _weights(rng, (2, 3, 4), dtype)
    return {"a": a, "b": b}, lambda: project(add(a, b), w)


def _scale_add(rng: RngStream, dtype: np.dtype):
    a = _tensor(rng, "a", (3, 4), dtype)
    b = _tensor(rng, "b", (3, 4), dtype)
    w = _weights(rng, (3, 4), dtype)
    return {"a": a, "b": b}, lambda: project(scale_add(a, b, 0.3, 0.7), w)


def _channel_mix(rng: RngStream, dtype: np.dtype):
    main = _tensor(rng, "main", (2, 3, 4, 4), dtype)
    aux = _tensor(rng, "aux", (2, 3, 4, 4), dtype)
    alpha = _tensor(rng, "alpha", (3,), dtype)
    w = _weights(rng, (2, 3, 4, 4), dtype)
    return {"main": main, "aux": aux, "alpha": alpha}, lambda: project(channel_mix(main, aux, alpha), w)


def _softmax_ce(rng: RngStream, dtype: np.dtype):
    logits = _tensor(rng, "logits", (4, 5), dtype, scale=2.0)
    labels = np.array([0, 3, 4, 1])
    return {"logits": logits}, lambda: softmax_cross_entropy(logits, labels)


def _sigmoid_bce(rng: RngStream, dtype: np.dtype):
    logits = _tensor(rng, "logits", (4, 6), dtype, scale=3.0)
    targets = (rng.split("targets").random((4, 6)) < 0.5).astype(np.uint8)
    return {"logits": logits}, lambda: sigmoid_binary_cross_entropy(logits, targets)


def get_checks() -> list[GradCheck]:
    """Checks for the tensor primitives and the losses."""
    return [
        GradCheck("conv2d_direct", "primitives", _conv("direct")),
        GradCheck("conv2d_gemm", "primitives", _conv("gemm")),
        GradCheck("maxpool2", "primitives", _unary(maxpool2, (2, 3, 6, 8), (2, 3, 3, 4))),
        GradCheck("leaky_relu", "primitives", _unary(lambda x: leaky_relu(x, 0.1), (3, 7), (3, 7))),
        GradCheck("fully_connected", "primitives", _fully_connected),
        GradCheck("dropout", "primitives", _dropout),
        GradCheck("flatten", "primitives", _unary(flatten, (2, 3, 2, 2), (2, 12))),
        GradCheck("add", "primitives", _add),
        GradCheck("scale_add", "primitives", _scale_add),
        GradCheck("channel_mix", "primitives", _channel_mix),
        GradCheck("softmax_cross_entropy", "losses", _softmax_ce),
        GradCheck("sigmoid_binary_cross_entropy", "losses", _sigmoid_bce),
    ]
