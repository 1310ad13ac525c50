"""Parameter initialisation."""

from __future__ import annotations

import math
from typing import Sequence

import numpy as np

from ..errors import DimensionError
from .rng import RngStream
from .tensor import Tensor


def fans(shape: Sequence[int]) -> tuple[int, int]:
    """Return (fan_in, fan_out) for a conv [C_out, C_in, kh, kw] or dense [D_in, D_out] shape."""
    shape = tuple(int(s) for s in shape)
    if len(shape) == 4:
        receptive = shape[2] * shape[3]
        return shape[1] * receptive, shape[0] * receptive
    if len(shape) == 2:
        return shape[0], shape[1]
    raise DimensionError(f"cannot derive fans for shape {shape}")


def xavier_bound(fan_in: int, fan_out: int) -> float:
    return math.sqrt(6.0 / (fan_in + fan_out))


def xavier_init(shape: Sequence[int], rng: RngStream, dtype: np.dtype = np.float64, name: str | None = None) -> Tensor:
    """Uniform Xavier draw on [-a, a] with ``a = sqrt(6 / (fan_in + fan_out))``."""
    bound = xavier_bound(*fans(shape))
    data = rng.uniform(-bound, bound, tuple(shape)).astype(dtype)
    return Tensor(data, requires_grad=True, name=name)


def zeros(shape: Sequence[int], dtype: np.dtype = np.float64, name: str | None = None) -> Tensor:
    return Tensor(np.zeros(tuple(shape), dtype=dtype), requires_grad=True, name=name)


def constant(shape: Sequence[int], value: float, dtype: np.dtype = np.float64, name: str | None = None) -> Tensor:
    return Tensor(np.full(tuple(shape), value, dtype=dtype), requires_grad=True, name=name)
