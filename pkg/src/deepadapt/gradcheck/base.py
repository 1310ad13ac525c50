"""Central finite-difference checking of tape gradients.

A check builds a set of input tensors and a closure returning a scalar loss.
The analytic gradient comes from one taped forward/backward pass, the
numeric one from ``(f(x + eps) - f(x - eps)) / (2 eps)`` at sampled
coordinates of every input.

Leaky ReLU and max-pooling are piecewise smooth. When a kink lies within
``eps`` of the sampled coordinate the forward and backward differences
disagree; the coordinate is then scored with a one-sided Richardson
estimate ``2 D(eps/2) - D(eps)`` taken on the side whose two step sizes
agree, and counted in ``CheckResult.one_sided``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Optional

import numpy as np

from ..core import RngStream, Tape, Tensor, record
from ..net import Precision

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-4
SINGLE_PRECISION_TOLERANCE = 1e-2
DEFAULT_SAMPLES = 6
ERROR_FLOOR = 1e-5

Builder = Callable[[RngStream, np.dtype], tuple[dict[str, Tensor], Callable[[], Tensor]]]


@dataclass
class GradCheck:
    """A named gradient check; *build* returns (inputs, loss closure)."""

    name: str
    category: str
    build: Builder


@dataclass
class CheckResult:
    """Outcome of one gradient check."""

    name: str
    category: str
    max_rel_error: float
    tolerance: float
    coordinates: int
    worst_input: str = ""
    warnings: list[str] = field(default_factory=list)
    one_sided: int = 0

    @property
    def passed(self) -> bool:
        return self.max_rel_error < self.tolerance

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "category": self.category,
            "max_rel_error": self.max_rel_error,
            "tolerance": self.tolerance,
            "coordinates": self.coordinates,
            "worst_input": self.worst_input,
            "one_sided": self.one_sided,
            "passed": self.passed,
            "warnings": list(self.warnings),
        }


def project(x: Tensor, weights: np.ndarray) -> Tensor:
    """Scalar ``sum(x * weights)``; reduces any output to a loss."""
    out = Tensor(np.asarray(np.sum(x.data * weights), dtype=x.dtype))

    def backward(g: np.ndarray):
        return (g * weights,)

    return record("project", (x,), out, backward)


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), ERROR_FLOOR)


def step_size(dtype: np.dtype) -> float:
    return 1e-6 if np.dtype(dtype) == np.float64 else 1e-3


def numeric_derivative(
    f: Callable[[float], float], x: float, f0: float, eps: float, kink_threshold: float
) -> tuple[float, bool]:
    """Finite-difference derivative of *f* at *x*; ``f0 = f(x)``.

    Returns the estimate and whether it is one-sided. The central difference
    is used unless the forward and backward differences differ by more than
    *kink_threshold* in relative terms.
    """
    plus, minus = f(x + eps), f(x - eps)
    forward, backward = (plus - f0) / eps, (f0 - minus) / eps
    if relative_error(forward, backward) <= kink_threshold:
        return (plus - minus) / (2 * eps), False
    half = eps / 2
    forward_half = (f(x + half) - f0) / half
    backward_half = (f0 - f(x - half)) / half
    if relative_error(forward, forward_half) <= relative_error(backward, backward_half):
        return 2 * forward_half - forward, True
    return 2 * backward_half - backward, True


def run_check(
    check: GradCheck,
    tolerance: float = DEFAULT_TOLERANCE,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    precision: Precision = Precision.DOUBLE,
) -> CheckResult:
    """Compare analytic and numeric gradients of one check.

    Args:
        check: The check to run.
        tolerance: Pass threshold on the largest relative error.
        samples: Coordinates sampled per input tensor (all when smaller).
        seed: Seed for inputs and coordinate choice.
        precision: Single precision relaxes the tolerance to at least 1e-2.
    """
    warnings = []
    if precision == Precision.SINGLE and tolerance < SINGLE_PRECISION_TOLERANCE:
        warnings.append(f"single precision: tolerance relaxed from {tolerance:g} to {SINGLE_PRECISION_TOLERANCE:g}")
        tolerance = SINGLE_PRECISION_TOLERANCE
    dtype = precision.dtype
    rng = RngStream(seed).split(f"gradcheck/{check.name}")
    inputs, loss_fn = check.build(rng, dtype)

    for t in inputs.values():
        t.zero_grad()
    with Tape() as tape:
        loss = loss_fn()
    tape.backward(loss)
    f0 = float(loss.data)

    eps = step_size(dtype)
    worst, worst_input, sampled, one_sided = 0.0, "", 0, 0
    for name, t in inputs.items():
        analytic = t.grad if t.grad is not None else np.zeros_like(t.data)
        flat = t.data.reshape(-1)
        n = flat.size
        coords = range(n) if n <= samples else rng.split(f"coords/{name}").choice(n, samples, replace=False)
        for i in coords:
            i = int(i)
            orig = flat[i]

            def at(value: float) -> float:
                flat[i] = value
                return float(loss_fn().data)

            try:
                numeric, sided = numeric_derivative(at, orig, f0, eps, tolerance)
            finally:
                flat[i] = orig
            err = relative_error(float(analytic.reshape(-1)[i]), numeric)
            sampled += 1
            one_sided += sided
            if err > worst:
                worst, worst_input = err, name
    result = CheckResult(check.name, check.category, worst, tolerance, sampled, worst_input, warnings, one_sided)
    logger.debug("%s: max rel error %.3e over %d coordinates (%d one-sided)", check.name, worst, sampled, one_sided)
    return result


def run_checks(
    checks: Iterable[GradCheck],
    tolerance: float = DEFAULT_TOLERANCE,
    samples: int = DEFAULT_SAMPLES,
    seed: int = 0,
    precision: Precision = Precision.DOUBLE,
    on_result: Optional[Callable[[CheckResult], None]] = None,
) -> list[CheckResult]:
    results = []
    for check in checks:
        result = run_check(check, tolerance, samples, seed, precision)
        if on_result is not None:
            on_result(result)
        results.append(result)
    return results
