"""Finite-difference gradient checks.

Check categories:
- primitives: conv2d (both methods), maxpool2, leaky_relu, fully_connected,
  dropout, flatten, add, scale_add, channel_mix
- losses: softmax cross-entropy, sigmoid binary cross-entropy
- network: a tiny two-pathway network in every adaptive mode
"""

from __future__ import annotations

from typing import List, Optional

from . import network, primitives
from .base import (
    DEFAULT_SAMPLES,
    DEFAULT_TOLERANCE,
    SINGLE_PRECISION_TOLERANCE,
    CheckResult,
    GradCheck,
    numeric_derivative,
    project,
    relative_error,
    run_check,
    run_checks,
)
from .network import NetworkCheckOptions, tiny_config


def get_all_checks(options: Optional[NetworkCheckOptions] = None) -> List[GradCheck]:
    """Get every registered gradient check; *options* shape the network checks."""
    return primitives.get_checks() + network.get_checks(options)


def get_checks_by_category(category: str, options: Optional[NetworkCheckOptions] = None) -> List[GradCheck]:
    """Get the checks of one category.

    Raises:
        ValueError: If the category is not found.
    """
    checks = [c for c in get_all_checks(options) if c.category == category]
    if not checks:
        available = sorted({c.category for c in get_all_checks(options)})
        raise ValueError(f"Unknown category: {category}. Available: {', '.join(available)}")
    return checks


__all__ = [
    "DEFAULT_SAMPLES",
    "DEFAULT_TOLERANCE",
    "SINGLE_PRECISION_TOLERANCE",
    "CheckResult",
    "GradCheck",
    "NetworkCheckOptions",
    "get_all_checks",
    "get_checks_by_category",
    "numeric_derivative",
    "project",
    "relative_error",
    "run_check",
    "run_checks",
    "tiny_config",
]
