"""Per-writer handwriting style parameters."""

from __future__ import annotations

import logging
from dataclasses import astuple, dataclass
from typing import Mapping

import numpy as np

from ..core import RngStream
from ..errors import DataError

logger = logging.getLogger(__name__)

SLANT_RANGE = (-0.35, 0.35)
STROKE_WIDTH_RANGE = (1.0, 3.0)
CURVATURE_GAIN_RANGE = (0.5, 1.5)
BASELINE_JITTER_RANGE = (0.0, 2.0)
SPACING_RANGE = (1.0, 4.0)


@dataclass(frozen=True)
class WriterStyle:
    """Distortions applied to every letter a writer produces.

    slant is a shear angle in radians, stroke_width, baseline_jitter and
    spacing are in pixels of the unscaled canvas, curvature_gain stretches
    letters vertically.
    """

    slant: float
    stroke_width: float
    curvature_gain: float
    baseline_jitter: float
    spacing: float

    def as_vector(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)


def writer_style(seed: int, writer_id: str) -> WriterStyle:
    """Derive the style of *writer_id*; a pure function of (seed, writer_id)."""
    rng = RngStream(seed).split(f"writer/{writer_id}")
    lows, highs = zip(SLANT_RANGE, STROKE_WIDTH_RANGE, CURVATURE_GAIN_RANGE, BASELINE_JITTER_RANGE, SPACING_RANGE)
    draws = rng.uniform(np.array(lows), np.array(highs), 5)
    return WriterStyle(*(float(v) for v in draws))


def check_style_identifiability(styles: Mapping[str, WriterStyle]) -> float:
    """Check that no two writers share a style.

    A nearest-style lookup on the true parameters then identifies every
    writer, so the classification task is solvable.

    Returns:
        The smallest pairwise distance between style vectors (inf for fewer
        than two writers).

    Raises:
        DataError: Two writers have identical styles.
    """
    ids = list(styles)
    if len(ids) < 2:
        return float("inf")
    vectors = np.stack([styles[w].as_vector() for w in ids])
    dist = np.sqrt(((vectors[:, None, :] - vectors[None, :, :]) ** 2).sum(axis=-1))
    np.fill_diagonal(dist, np.inf)
    closest = float(dist.min())
    if closest <= 0.0:
        i, j = np.unravel_index(int(np.argmin(dist)), dist.shape)
        raise DataError(f"writers {ids[i]!r} and {ids[j]!r} have identical styles")
    logger.debug("style identifiability: min pairwise distance %.4f over %d writers", closest, len(ids))
    return closest
