"""Adam optimizer with bias correction."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from ..errors import DimensionError
from .tensor import Tensor


@dataclass
class AdamState:
    """Per-parameter moment estimates and the shared step counter."""

    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)

    def ensure(self, params: Mapping[str, Tensor]) -> None:
        """Create zero moments for parameters seen for the first time."""
        for name, p in params.items():
            if name not in self.first_moment:
                self.first_moment[name] = np.zeros_like(p.data)
                self.second_moment[name] = np.zeros_like(p.data)


def adam_step(
    params: Mapping[str, Tensor],
    grads: Mapping[str, np.ndarray],
    state: AdamState,
) -> tuple[Mapping[str, Tensor], AdamState]:
    """Apply one bias-corrected Adam update in place.

    Parameters without a gradient entry are treated as having a zero gradient,
    so their moments still decay.

    Returns:
        The same ``params`` mapping and ``state``, updated.
    """
    unknown = set(grads) - set(params)
    if unknown:
        raise DimensionError(f"gradients given for unknown parameters: {sorted(unknown)}")
    state.ensure(params)

    state.step += 1
    bc1 = 1.0 - state.beta1 ** state.step
    bc2 = 1.0 - state.beta2 ** state.step
    step_size = state.learning_rate / bc1

    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(p.data)
        m = state.first_moment[name]
        v = state.second_moment[name]
        if g.shape != p.shape or m.shape != p.shape:
            raise DimensionError(
                f"parameter {name!r} has shape {p.shape}, gradient {g.shape}, moments {m.shape}"
            )
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        denom = np.sqrt(v * (1.0 / bc2)) + state.epsilon
        p.data -= step_size * m / denom

    return params, state
