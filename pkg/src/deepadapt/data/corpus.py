"""Manifests, the synthetic corpus generator and the train/test split.

A manifest is UTF-8 text, one ``path<TAB>writer_id<TAB>word`` record per
line. Relative paths resolve against the manifest file's directory.
"""

from __future__ import annotations

import logging
import os
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from ..core import RngStream
from ..errors import DataError, GlyphError, ParameterError, StorageError
from .imageio import load_and_resize, write_pgm
from .render import check_word, ink_coverage, render_word
from .style import check_style_identifiability, writer_style

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.tsv"
COVERAGE_RANGE = (0.05, 0.35)

_DEFAULT_WORDS = (
    "a", "i", "an", "at", "be", "by", "do", "he", "in", "is", "it", "of", "on", "or", "to", "we",
    "and", "are", "but", "for", "had", "her", "his", "not", "one", "the", "was", "you",
    "been", "from", "have", "that", "them", "they", "this", "were", "what", "when", "with", "word",
    "about", "could", "other", "their", "there", "which", "would", "write",
    "before", "letter", "people", "should", "writer",
    "another", "between", "through", "written",
    "document", "evidence", "thousand",
    "character", "knowledge", "signature",
    "experience", "government", "identified",
    "information", "environment",
    "handwritings",
    "international",
)


def default_vocab() -> list[str]:
    """Built-in English word list covering lengths 1 to 13."""
    return sorted(_DEFAULT_WORDS)


@dataclass(frozen=True)
class ManifestRecord:
    path: str
    writer_id: str
    word: str


@dataclass
class Manifest:
    """Records plus the directory their relative paths resolve against."""

    records: list[ManifestRecord]
    root: Path = field(default_factory=Path)
    split: Optional[str] = None

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for rec in self.records:
            if rec.path in seen:
                raise DataError(f"image path {rec.path!r} appears twice in the manifest")
            seen.add(rec.path)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ManifestRecord]:
        return iter(self.records)

    def resolve(self, record: ManifestRecord) -> Path:
        p = Path(record.path)
        return p if p.is_absolute() else self.root / p

    def writers(self) -> list[str]:
        return sorted({rec.writer_id for rec in self.records})

    def words(self) -> list[str]:
        return [rec.word for rec in self.records]

    def by_writer(self) -> dict[str, list[int]]:
        """Writer id -> record indices, in manifest order."""
        groups: dict[str, list[int]] = defaultdict(list)
        for i, rec in enumerate(self.records):
            groups[rec.writer_id].append(i)
        return dict(groups)

    def load_images(self, height: int, width: int) -> np.ndarray:
        """Stack every image as a [N, 1, height, width] float array."""
        if not self.records:
            return np.zeros((0, 1, height, width))
        return np.stack([load_and_resize(self.resolve(rec), height, width) for rec in self.records])


def read_manifest(path: Path, split: Optional[str] = None) -> Manifest:
    """Parse a manifest file.

    Raises:
        StorageError: The file cannot be read.
        DataError: A malformed line or a duplicated image path.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot read manifest {path}: {exc}") from exc
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3 or not all(p.strip() for p in parts):
            raise DataError(f"{path}:{lineno}: expected path<TAB>writer_id<TAB>word, got {line!r}")
        records.append(ManifestRecord(*(p.strip() for p in parts)))
    return Manifest(records=records, root=path.parent, split=split)


def write_manifest(path: Path, manifest: Manifest) -> Path:
    """Write *manifest*, rewriting relative paths against the new file's directory."""
    path = Path(path)
    lines = []
    for rec in manifest.records:
        rel = os.path.relpath(manifest.resolve(rec), path.parent)
        lines.append(f"{Path(rel).as_posix()}\t{rec.writer_id}\t{rec.word}\n")
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.writelines(lines)
    except OSError as exc:
        raise StorageError(f"cannot write manifest {path}: {exc}") from exc
    return path


def check_closed_set(train: Manifest, test: Manifest) -> None:
    """Every test writer must have training samples."""
    unseen = sorted(set(test.writers()) - set(train.writers()))
    if unseen:
        raise DataError(f"test writers absent from training: {unseen[:5]}")


def writer_ids(num_writers: int) -> list[str]:
    width = max(3, len(str(num_writers - 1)))
    return [f"w{i:0{width}d}" for i in range(num_writers)]


def generate_corpus(
    num_writers: int,
    words_per_writer: int,
    vocab: Sequence[str],
    seed: int,
    out_dir: Path,
    height: int = 40,
    width: int = 120,
) -> Manifest:
    """Render a synthetic corpus into *out_dir*.

    Each writer gets *words_per_writer* words drawn from *vocab* with
    replacement. Sample ``k`` draws from ``split(f"sample/{k}")``, so content
    depends only on the arguments and not on generation order.

    Writes ``images/<writer>/<index>.pgm`` plus ``manifest.tsv``.

    Raises:
        ParameterError: Non-positive counts.
        GlyphError: A vocabulary word cannot be rendered.
        StorageError: Files cannot be written.
    """
    if num_writers < 1 or words_per_writer < 1:
        raise ParameterError(f"need at least one writer and one word each, got {num_writers} x {words_per_writer}")
    words = sorted(set(vocab))
    if not words:
        raise DataError("vocabulary is empty")
    for word in words:
        try:
            check_word(word)
        except GlyphError as exc:
            raise GlyphError(f"vocabulary word {word!r}: {exc}") from exc
    out_dir = Path(out_dir)
    root = RngStream(seed)

    ids = writer_ids(num_writers)
    styles = {w: writer_style(seed, w) for w in ids}
    check_style_identifiability(styles)

    records = []
    coverage = 0.0
    for w_index, writer in enumerate(ids):
        for j in range(words_per_writer):
            k = w_index * words_per_writer + j
            rng = root.split(f"sample/{k}")
            word = words[int(rng.integers(0, len(words)))]
            sample = render_word(styles[writer], word, rng, height, width, writer_id=writer)
            rel = f"images/{writer}/{j:05d}.pgm"
            write_pgm(out_dir / rel, sample.image)
            coverage += ink_coverage(sample.image)
            records.append(ManifestRecord(rel, writer, word))

    mean_cov = coverage / len(records)
    lo, hi = COVERAGE_RANGE
    if not lo <= mean_cov <= hi:
        logger.warning("mean ink coverage %.3f outside [%.2f, %.2f]", mean_cov, lo, hi)
    logger.info("generated %d samples from %d writers (ink coverage %.3f)", len(records), num_writers, mean_cov)

    manifest = Manifest(records=records, root=out_dir)
    write_manifest(out_dir / MANIFEST_FILE, manifest)
    return manifest


def split_manifest(manifest: Manifest, train_fraction: float, seed: int) -> tuple[Manifest, Manifest]:
    """Per-writer stratified random split.

    Each writer keeps ``round(n * train_fraction)`` samples for training,
    clamped so both halves get at least one.

    Raises:
        ParameterError: train_fraction outside (0, 1).
        DataError: A writer has fewer than two samples.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ParameterError(f"train_fraction must be in (0, 1), got {train_fraction}")
    root = RngStream(seed)
    train_idx: list[int] = []
    test_idx: list[int] = []
    for writer, indices in sorted(manifest.by_writer().items()):
        n = len(indices)
        if n < 2:
            raise DataError(f"writer {writer!r} has {n} sample; at least 2 are needed to split")
        n_train = min(max(int(round(n * train_fraction)), 1), n - 1)
        order = root.split(f"split/{writer}").permutation(n)
        chosen = set(order[:n_train].tolist())
        for pos, idx in enumerate(indices):
            (train_idx if pos in chosen else test_idx).append(idx)

    def subset(idx: Iterable[int], tag: str) -> Manifest:
        return Manifest([manifest.records[i] for i in sorted(idx)], root=manifest.root, split=tag)

    return subset(train_idx, "train"), subset(test_idx, "test")
