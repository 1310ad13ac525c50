"""Word-image data: synthetic writers, rendering, image I/O and manifests."""

from __future__ import annotations

from .corpus import (
    MANIFEST_FILE,
    Manifest,
    ManifestRecord,
    check_closed_set,
    default_vocab,
    generate_corpus,
    read_manifest,
    split_manifest,
    write_manifest,
    writer_ids,
)
from .glyphs import GLYPHS, Glyph, glyph_for
from .imageio import load_and_resize, read_gray, resize_bilinear, write_pgm
from .render import Sample, check_word, ink_coverage, render_word
from .style import WriterStyle, check_style_identifiability, writer_style

__all__ = [
    "GLYPHS",
    "MANIFEST_FILE",
    "Glyph",
    "Manifest",
    "ManifestRecord",
    "Sample",
    "WriterStyle",
    "check_closed_set",
    "check_style_identifiability",
    "check_word",
    "default_vocab",
    "generate_corpus",
    "glyph_for",
    "ink_coverage",
    "load_and_resize",
    "read_gray",
    "read_manifest",
    "render_word",
    "resize_bilinear",
    "split_manifest",
    "write_manifest",
    "write_pgm",
    "writer_ids",
    "writer_style",
]
