"""Polyline skeletons for the 26 lower-case letters.

Coordinates are in letter units: x grows to the right from the letter's left
edge, y grows upwards from the baseline, x-height is 0.5, ascenders reach 1.0
and descenders -0.5. Each glyph is a list of strokes (point sequences) plus
its advance width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

Point = tuple[float, float]
Stroke = list[Point]


@dataclass(frozen=True)
class Glyph:
    strokes: tuple[tuple[Point, ...], ...]
    advance: float


def _arc(cx: float, cy: float, rx: float, ry: float, start: float, end: float, steps: int = 10) -> Stroke:
    """Points on an elliptic arc, angles in degrees, counter-clockwise from +x."""
    pts = []
    for k in range(steps + 1):
        a = math.radians(start + (end - start) * k / steps)
        pts.append((cx + rx * math.cos(a), cy + ry * math.sin(a)))
    return pts


def _bowl(cx: float = 0.25) -> Stroke:
    return _arc(cx, 0.25, 0.25, 0.25, 0, 360, 16)


def _glyph(advance: float, *strokes: Stroke) -> Glyph:
    return Glyph(strokes=tuple(tuple(s) for s in strokes), advance=advance)


GLYPHS: dict[str, Glyph] = {
    "a": _glyph(0.6, _bowl(), [(0.5, 0.5), (0.5, 0.0)]),
    "b": _glyph(0.6, [(0.0, 1.0), (0.0, 0.0)], _bowl()),
    "c": _glyph(0.5, _arc(0.25, 0.25, 0.25, 0.25, 45, 315, 12)),
    "d": _glyph(0.6, _bowl(), [(0.5, 1.0), (0.5, 0.0)]),
    "e": _glyph(0.55, [(0.02, 0.25), (0.5, 0.25)] + _arc(0.25, 0.25, 0.25, 0.25, 0, 320, 14)),
    "f": _glyph(0.4, _arc(0.3, 0.85, 0.12, 0.12, 30, 180, 6) + [(0.18, 0.0)], [(0.0, 0.5), (0.38, 0.5)]),
    "g": _glyph(0.6, _bowl(), [(0.5, 0.5)] + _arc(0.25, -0.2, 0.25, 0.25, 0, -160, 8)),
    "h": _glyph(0.6, [(0.0, 1.0), (0.0, 0.0)], [(0.0, 0.3)] + _arc(0.25, 0.3, 0.25, 0.2, 180, 0, 8) + [(0.5, 0.0)]),
    "i": _glyph(0.25, [(0.1, 0.5), (0.1, 0.0)], [(0.1, 0.68), (0.1, 0.74)]),
    "j": _glyph(0.35, [(0.25, 0.5)] + _arc(0.1, -0.3, 0.15, 0.2, 0, -180, 6), [(0.25, 0.68), (0.25, 0.74)]),
    "k": _glyph(0.5, [(0.0, 1.0), (0.0, 0.0)], [(0.45, 0.5), (0.02, 0.2), (0.45, 0.0)]),
    "l": _glyph(0.25, [(0.1, 1.0), (0.1, 0.0)]),
    "m": _glyph(
        0.9,
        [(0.0, 0.5), (0.0, 0.0)],
        [(0.0, 0.3)] + _arc(0.2, 0.3, 0.2, 0.2, 180, 0, 6) + [(0.4, 0.0)],
        [(0.4, 0.3)] + _arc(0.6, 0.3, 0.2, 0.2, 180, 0, 6) + [(0.8, 0.0)],
    ),
    "n": _glyph(0.6, [(0.0, 0.5), (0.0, 0.0)], [(0.0, 0.3)] + _arc(0.25, 0.3, 0.25, 0.2, 180, 0, 8) + [(0.5, 0.0)]),
    "o": _glyph(0.6, _bowl()),
    "p": _glyph(0.6, [(0.0, 0.5), (0.0, -0.5)], _bowl()),
    "q": _glyph(0.6, _bowl(), [(0.5, 0.5), (0.5, -0.5), (0.6, -0.4)]),
    "r": _glyph(0.45, [(0.0, 0.5), (0.0, 0.0)], [(0.0, 0.3)] + _arc(0.22, 0.3, 0.22, 0.18, 180, 40, 6)),
    "s": _glyph(
        0.5,
        _arc(0.25, 0.375, 0.22, 0.125, 20, 270, 8) + _arc(0.25, 0.125, 0.22, 0.125, 90, -160, 8),
    ),
    "t": _glyph(0.4, [(0.15, 0.85), (0.15, 0.05), (0.3, 0.0)], [(0.0, 0.5), (0.35, 0.5)]),
    "u": _glyph(0.6, [(0.0, 0.5)] + _arc(0.25, 0.2, 0.25, 0.2, 180, 360, 8) + [(0.5, 0.5)], [(0.5, 0.5), (0.5, 0.0)]),
    "v": _glyph(0.55, [(0.0, 0.5), (0.25, 0.0), (0.5, 0.5)]),
    "w": _glyph(0.75, [(0.0, 0.5), (0.15, 0.0), (0.33, 0.4), (0.5, 0.0), (0.68, 0.5)]),
    "x": _glyph(0.55, [(0.0, 0.5), (0.5, 0.0)], [(0.5, 0.5), (0.0, 0.0)]),
    "y": _glyph(0.55, [(0.0, 0.5), (0.25, 0.0)], [(0.5, 0.5), (0.15, -0.4), (0.02, -0.5)]),
    "z": _glyph(0.55, [(0.0, 0.5), (0.5, 0.5), (0.0, 0.0), (0.5, 0.0)]),
}


def glyph_for(ch: str) -> Glyph | None:
    """Template for *ch* (case-insensitive), or None if the letter is unsupported."""
    return GLYPHS.get(ch.casefold())
