"""Differentiable primitives.

Every function takes and returns ``Tensor`` objects and records itself on the
active tape. Backward closures capture only what they need from the forward
pass.
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import DimensionError, ParameterError
from .rng import RngStream
from .tensor import Tensor, record

CONV_METHODS = ("direct", "gemm")


# =============================================================================
# Convolution and pooling
# =============================================================================

def _check_conv_shapes(x: Tensor, kernels: Tensor, bias: Tensor) -> None:
    if x.data.ndim != 4:
        raise DimensionError(f"conv2d input must be [N,C,H,W], got shape {x.shape}")
    if kernels.data.ndim != 4 or kernels.shape[2:] != (3, 3):
        raise DimensionError(f"conv2d kernels must be [C_out,C_in,3,3], got shape {kernels.shape}")
    if kernels.shape[1] != x.shape[1]:
        raise DimensionError(
            f"conv2d channel mismatch: input has {x.shape[1]} channels, kernels expect {kernels.shape[1]}"
        )
    if bias.shape != (kernels.shape[0],):
        raise DimensionError(f"conv2d bias must have shape ({kernels.shape[0]},), got {bias.shape}")


def _conv_direct(xp: np.ndarray, w: np.ndarray, b: np.ndarray, h: int, wd: int) -> np.ndarray:
    # bias first, then taps in (c_in, ky, kx) order: the serial loop order
    n, c_in = xp.shape[:2]
    out = np.empty((n, w.shape[0], h, wd), dtype=xp.dtype)
    out[...] = b[None, :, None, None]
    for c in range(c_in):
        for ky in range(3):
            for kx in range(3):
                out += w[:, c, ky, kx][None, :, None, None] * xp[:, c : c + 1, ky : ky + h, kx : kx + wd]
    return out


def _conv_gemm(xp: np.ndarray, w: np.ndarray, b: np.ndarray, h: int, wd: int) -> np.ndarray:
    n, c_in = xp.shape[:2]
    windows = sliding_window_view(xp, (3, 3), axis=(2, 3))  # [N, C, H, W, 3, 3]
    cols = np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5)).reshape(n * h * wd, c_in * 9)
    out = cols @ w.reshape(w.shape[0], -1).T + b
    return np.ascontiguousarray(out.reshape(n, h, wd, w.shape[0]).transpose(0, 3, 1, 2))


def conv2d(x: Tensor, kernels: Tensor, bias: Tensor, method: str = "direct") -> Tensor:
    """3x3 convolution, stride 1, zero padding 1 (output keeps H and W).

    Args:
        x: Input of shape [N, C_in, H, W].
        kernels: Weights of shape [C_out, C_in, 3, 3].
        bias: Bias of shape [C_out].
        method: ``"direct"`` accumulates the taps one by one and matches a
            serial loop exactly; ``"gemm"`` uses im2col and a matrix product.

    Returns:
        Output of shape [N, C_out, H, W].
    """
    _check_conv_shapes(x, kernels, bias)
    if method not in CONV_METHODS:
        raise ParameterError(f"unknown conv method {method!r}, expected one of {CONV_METHODS}")

    h, wd = x.shape[2], x.shape[3]
    xp = np.pad(x.data, ((0, 0), (0, 0), (1, 1), (1, 1)))
    w = kernels.data
    if method == "direct":
        out = _conv_direct(xp, w, bias.data, h, wd)
    else:
        out = _conv_gemm(xp, w, bias.data, h, wd)

    def backward(g: np.ndarray):
        db = g.sum(axis=(0, 2, 3))
        windows = sliding_window_view(xp, (3, 3), axis=(2, 3))
        dw = np.tensordot(g, windows, axes=([0, 2, 3], [0, 2, 3]))
        dxp = np.zeros_like(xp)
        for ky in range(3):
            for kx in range(3):
                contrib = np.tensordot(g, w[:, :, ky, kx], axes=([1], [0]))  # [N, H, W, C_in]
                dxp[:, :, ky : ky + h, kx : kx + wd] += contrib.transpose(0, 3, 1, 2)
        return dxp[:, :, 1:-1, 1:-1], dw, db

    return record("conv2d", (x, kernels, bias), Tensor(out), backward)


def maxpool2(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2; odd trailing rows and columns are dropped.

    Gradient goes to the first maximum of each window in row-major order.
    """
    if x.data.ndim != 4:
        raise DimensionError(f"maxpool2 input must be [N,C,H,W], got shape {x.shape}")
    n, c, h, w = x.shape
    if h < 2 or w < 2:
        raise DimensionError(f"maxpool2 needs H >= 2 and W >= 2, got {h}x{w}")

    ho, wo = h // 2, w // 2
    cells = (
        x.data[:, :, : 2 * ho, : 2 * wo]
        .reshape(n, c, ho, 2, wo, 2)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(n, c, ho, wo, 4)
    )
    arg = np.argmax(cells, axis=-1)
    out = np.take_along_axis(cells, arg[..., None], axis=-1)[..., 0]

    def backward(g: np.ndarray):
        routed = np.zeros((n, c, ho, wo, 4), dtype=g.dtype)
        np.put_along_axis(routed, arg[..., None], g[..., None], axis=-1)
        dx = np.zeros((n, c, h, w), dtype=g.dtype)
        dx[:, :, : 2 * ho, : 2 * wo] = (
            routed.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(n, c, 2 * ho, 2 * wo)
        )
        return (dx,)

    return record("maxpool2", (x,), Tensor(np.ascontiguousarray(out)), backward)


# =============================================================================
# Elementwise and dense
# =============================================================================

def leaky_relu(x: Tensor, slope: float = 0.1) -> Tensor:
    """Elementwise ``max(slope * x, x)``; the derivative at 0 is taken as 1."""
    data = x.data
    out = np.maximum(slope * data, data)
    local = np.where(data >= 0, 1.0, slope).astype(data.dtype)

    def backward(g: np.ndarray):
        return (g * local,)

    return record("leaky_relu", (x,), Tensor(out), backward)


def fully_connected(x: Tensor, weights: Tensor, bias: Tensor) -> Tensor:
    """Affine map ``x @ weights + bias`` for x of shape [N, D_in]."""
    if x.data.ndim != 2 or weights.data.ndim != 2:
        raise DimensionError(f"fully_connected needs 2-D input and weights, got {x.shape} and {weights.shape}")
    if x.shape[1] != weights.shape[0]:
        raise DimensionError(f"fully_connected inner dims differ: input {x.shape}, weights {weights.shape}")
    if bias.shape != (weights.shape[1],):
        raise DimensionError(f"fully_connected bias must have shape ({weights.shape[1]},), got {bias.shape}")

    out = x.data @ weights.data + bias.data

    def backward(g: np.ndarray):
        return g @ weights.data.T, x.data.T @ g, g.sum(axis=0)

    return record("fully_connected", (x, weights, bias), Tensor(out), backward)


def dropout(x: Tensor, rate: float, training: bool, rng: Optional[RngStream]) -> Tensor:
    """Inverted dropout: survivors are scaled by 1/(1-rate) at training time."""
    if not 0.0 <= rate < 1.0:
        raise ParameterError(f"dropout rate must lie in [0, 1), got {rate}")
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ParameterError("dropout in training mode needs an RngStream")

    keep = (rng.random(x.shape) >= rate).astype(x.dtype) * x.dtype.type(1.0 / (1.0 - rate))
    out = x.data * keep

    def backward(g: np.ndarray):
        return (g * keep,)

    return record("dropout", (x,), Tensor(out), backward)


def flatten(x: Tensor) -> Tensor:
    """[N, ...] -> [N, D]."""
    shape = x.shape
    out = x.data.reshape(shape[0], -1)

    def backward(g: np.ndarray):
        return (g.reshape(shape),)

    return record("flatten", (x,), Tensor(out), backward)


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise DimensionError(f"add needs equal shapes, got {a.shape} and {b.shape}")

    def backward(g: np.ndarray):
        return g, g

    return record("add", (a, b), Tensor(a.data + b.data), backward)


def scale_add(a: Tensor, b: Tensor, wa: float, wb: float) -> Tensor:
    """``wa * a + wb * b`` with constant weights."""
    if a.shape != b.shape:
        raise DimensionError(f"scale_add needs equal shapes, got {a.shape} and {b.shape}")
    out = wa * a.data + wb * b.data

    def backward(g: np.ndarray):
        return wa * g, wb * g

    return record("scale_add", (a, b), Tensor(np.asarray(out, dtype=a.dtype)), backward)


def channel_mix(main: Tensor, aux: Tensor, alpha: Tensor) -> Tensor:
    """Per-channel ``alpha_j * main + (1 - alpha_j) * aux`` for [N, C, H, W] maps."""
    if main.shape != aux.shape:
        raise DimensionError(f"channel_mix needs equal shapes, got {main.shape} and {aux.shape}")
    if main.data.ndim != 4 or alpha.shape != (main.shape[1],):
        raise DimensionError(f"channel_mix alpha must have shape ({main.shape[1]},), got {alpha.shape}")

    a = alpha.data[None, :, None, None]
    out = a * main.data + (1.0 - a) * aux.data

    def backward(g: np.ndarray):
        d_alpha = (g * (main.data - aux.data)).sum(axis=(0, 2, 3))
        return g * a, g * (1.0 - a), d_alpha

    return record("channel_mix", (main, aux, alpha), Tensor(out), backward)


# =============================================================================
# Inference helpers (not recorded)
# =============================================================================

def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def sigmoid(logits: np.ndarray) -> np.ndarray:
    return np.exp(-np.logaddexp(0.0, -logits))
