"""Adaptive units moving auxiliary features into the main pathway.

For block i the next main-pathway input is ``main_i + C_i(aux_i)``:

- baseline: C = 0, the main map passes unchanged
- linear:   per-channel ``alpha * main + (1 - alpha) * aux``
- deep:     ``main + conv(leaky(conv(aux)))`` with channel-preserving 3x3 convs

The auxiliary pathway always continues with its own, unmodified map.
"""

from __future__ import annotations

from typing import Mapping

from ..core import Tensor, add, channel_mix, conv2d, leaky_relu
from ..errors import DimensionError
from .config import AdaptiveMode


def alpha_name(block: int) -> str:
    return f"adapt.block{block}.alpha"


def deep_names(block: int) -> list[str]:
    return [f"adapt.block{block}.conv{k}.{p}" for k in (1, 2) for p in ("w", "b")]


def adapt(
    mode: AdaptiveMode,
    block: int,
    main_act: Tensor,
    aux_act: Tensor,
    params: Mapping[str, Tensor],
    *,
    leaky_slope: float = 0.1,
    conv_method: str = "gemm",
) -> Tensor:
    """Return the main pathway's input for the block after *block*."""
    if main_act.shape != aux_act.shape:
        raise DimensionError(
            f"block {block} activations differ: main {main_act.shape}, aux {aux_act.shape}"
        )
    mode = AdaptiveMode(mode)
    if mode == AdaptiveMode.BASELINE:
        return main_act
    if mode == AdaptiveMode.LINEAR:
        return channel_mix(main_act, aux_act, params[alpha_name(block)])

    w1, b1, w2, b2 = (params[n] for n in deep_names(block))
    hidden = leaky_relu(conv2d(aux_act, w1, b1, method=conv_method), leaky_slope)
    residual = conv2d(hidden, w2, b2, method=conv_method)
    return add(main_act, residual)
