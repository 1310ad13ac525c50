"""Rasterise words in a writer's style.

Letters are drawn as anti-aliased polylines on a supersampled canvas, box
filtered down to the working resolution, inverted to dark ink on a light
background and finally stretched to the network input size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import cv2
import numpy as np

from ..core import RngStream
from ..errors import GlyphError
from .glyphs import glyph_for
from .imageio import resize_bilinear
from .style import WriterStyle

UNIT = 16
CANVAS_HEIGHT = 48
BASELINE = 32
MARGIN = 4
SUPERSAMPLE = 4
_SHIFT = 4


@dataclass
class Sample:
    """One word image; ``image`` has shape [1, H, W] with values in [0, 1]."""

    image: np.ndarray
    writer_id: str
    word: str


def check_word(word: str) -> None:
    """Raise GlyphError unless every character of *word* has a glyph."""
    if not word:
        raise GlyphError("cannot render an empty word")
    for ch in word:
        if glyph_for(ch) is None:
            raise GlyphError(f"no glyph for character {ch!r} in {word!r}")


def _layout(style: WriterStyle, word: str, rng: RngStream) -> tuple[list[np.ndarray], int]:
    """Place every stroke of *word* in canvas pixel coordinates.

    Returns:
        (strokes, canvas_width) with strokes as float [P, 2] (x, y) arrays.
    """
    shear = math.tan(style.slant)
    jitter = rng.uniform(-style.baseline_jitter, style.baseline_jitter, len(word))
    # slanted ascenders and descenders may poke out to either side
    overhang = abs(shear) * UNIT * style.curvature_gain
    pen_x = MARGIN + overhang
    strokes: list[np.ndarray] = []
    for ch, dy in zip(word, jitter):
        glyph = glyph_for(ch)
        for stroke in glyph.strokes:
            pts = np.asarray(stroke, dtype=np.float64)
            y = pts[:, 1] * style.curvature_gain
            x = pts[:, 0] + shear * y
            strokes.append(np.stack([pen_x + x * UNIT, BASELINE + dy - y * UNIT], axis=1))
        pen_x += glyph.advance * UNIT + style.spacing
    width = int(math.ceil(pen_x + overhang + MARGIN))
    return strokes, width


def render_word(
    style: WriterStyle,
    word: str,
    rng: RngStream,
    height: int = 40,
    width: int = 120,
    writer_id: str = "",
) -> Sample:
    """Render *word* as *style* would write it.

    Args:
        style: Writer distortions.
        word: Non-empty alphabetic word; case is ignored for the letter shapes.
        rng: Per-sample stream for the baseline jitter.
        height, width: Output size after the final stretch.
        writer_id: Carried into the returned Sample.

    Raises:
        GlyphError: Empty word or a character without a template.
    """
    check_word(word)
    strokes, canvas_w = _layout(style, word, rng)

    s = SUPERSAMPLE
    canvas = np.zeros((CANVAS_HEIGHT * s, canvas_w * s), dtype=np.uint8)
    scale = s * (1 << _SHIFT)
    polylines = [np.rint((st + 0.5) * scale - (1 << _SHIFT) * 0.5).astype(np.int32) for st in strokes]
    thickness = max(1, int(round(style.stroke_width * s)))
    cv2.polylines(canvas, polylines, isClosed=False, color=255, thickness=thickness, lineType=cv2.LINE_AA, shift=_SHIFT)

    ink = cv2.resize(canvas.astype(np.float64) / 255.0, (canvas_w, CANVAS_HEIGHT), interpolation=cv2.INTER_AREA)
    image = np.clip(1.0 - ink, 0.0, 1.0)
    image = np.clip(resize_bilinear(image, height, width), 0.0, 1.0)
    return Sample(image=image[None, :, :], writer_id=writer_id, word=word)


def ink_coverage(image: np.ndarray) -> float:
    """Mean ink fraction of a dark-on-light image."""
    return float(np.mean(1.0 - np.asarray(image)))
