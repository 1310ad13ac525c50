"""Writer identification metrics.

All metrics are computed from one cached forward pass over the test images
(dropout off, no tape), so evaluation never touches the parameters.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal, Mapping, Optional, Sequence, Union

import numpy as np
from pydantic import BaseModel, Field

from .core import RngStream, Tensor, sigmoid, softmax
from .data import Manifest, check_closed_set
from .errors import DataError, ParameterError, StorageError
from .labels import (
    ALPHABET,
    MAX_WORD_LENGTH,
    NUM_CHARS,
    AuxHeadSpec,
    AuxTask,
    char_attributes,
    length_class,
    letters_of,
)
from .net import Network

logger = logging.getLogger(__name__)

LOW_SUPPORT = 20
DEFAULT_FUSE_N = (1, 2, 3, 4, 5)

ArrayLike = Union[np.ndarray, Tensor]


class FusionRequest(BaseModel):
    """How many words per writer to fuse and how often to repeat the draw."""

    n: int = Field(ge=1, le=10)
    repetitions: int = Field(default=20, ge=1)
    seed: int = 0
    average: Literal["softmax", "logits"] = "softmax"


@dataclass
class LengthBucket:
    count: int
    top1: float

    @property
    def low_support(self) -> bool:
        return self.count < LOW_SUPPORT


@dataclass
class CharBucket:
    count: int
    top1: float


@dataclass
class MetricsReport:
    top1: float
    top5: float
    num_samples: int
    num_writers: int
    aux: dict[str, float] = field(default_factory=dict)
    per_length: dict[int, LengthBucket] = field(default_factory=dict)
    per_char: dict[str, CharBucket] = field(default_factory=dict)
    fusion_curve: dict[int, float] = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "top1": self.top1,
            "top5": self.top5,
            "samples": self.num_samples,
            "writers": self.num_writers,
            "aux": dict(self.aux),
            "fusion": {str(n): v for n, v in self.fusion_curve.items()},
        }


@dataclass
class ModelOutputs:
    """Cached raw head outputs for a labelled set."""

    writer_logits: np.ndarray
    aux_logits: np.ndarray
    writer_labels: np.ndarray
    words: list[str]


def _array(x: ArrayLike) -> np.ndarray:
    return x.data if isinstance(x, Tensor) else np.asarray(x)


# =============================================================================
# Top-k
# =============================================================================

def topk_hits(logits: ArrayLike, labels: np.ndarray, k: int) -> np.ndarray:
    """Boolean per row: is the label among the *k* largest logits (ties go to the lower index)."""
    logits = _array(logits)
    labels = np.asarray(labels)
    if logits.ndim != 2:
        raise ParameterError(f"logits must be [N,K], got shape {logits.shape}")
    n_classes = logits.shape[1]
    if not 1 <= k <= n_classes:
        raise ParameterError(f"k must be in [1, {n_classes}], got {k}")
    if labels.shape != (logits.shape[0],):
        raise ParameterError(f"labels must have shape ({logits.shape[0]},), got {labels.shape}")
    order = np.argsort(-logits, axis=1, kind="stable")[:, :k]
    return (order == labels[:, None]).any(axis=1)


def topk_accuracy(logits: ArrayLike, labels: np.ndarray, k: int) -> float:
    """Fraction of rows whose true label is among the *k* largest logits.

    Raises:
        ParameterError: k outside [1, K].
    """
    hits = topk_hits(logits, labels, k)
    return float(hits.mean()) if hits.size else 0.0


# =============================================================================
# Forward pass
# =============================================================================

def writer_labels(manifest: Manifest, writer_index: Mapping[str, int]) -> np.ndarray:
    missing = sorted({rec.writer_id for rec in manifest} - set(writer_index))
    if missing:
        raise DataError(f"test writers absent from training: {missing[:5]}")
    return np.array([writer_index[rec.writer_id] for rec in manifest], dtype=np.int64)


def predict(network: Network, images: np.ndarray, batch_size: int = 64) -> tuple[np.ndarray, np.ndarray]:
    """Raw (writer_logits, aux_logits) for [N,1,H,W] images, dropout off."""
    cfg = network.config
    writer_out, aux_out = [], []
    for start in range(0, len(images), batch_size):
        w, a = network.forward(images[start:start + batch_size], training=False)
        writer_out.append(w.data)
        aux_out.append(a.data)
    if not writer_out:
        return np.zeros((0, cfg.writer_classes)), np.zeros((0, cfg.aux_head.width))
    return np.concatenate(writer_out), np.concatenate(aux_out)


def collect_outputs(network: Network, manifest: Manifest, writer_index: Mapping[str, int]) -> ModelOutputs:
    cfg = network.config
    labels = writer_labels(manifest, writer_index)
    images = manifest.load_images(cfg.input_height, cfg.input_width).astype(cfg.dtype)
    writer_logits, aux_logits = predict(network, images)
    return ModelOutputs(writer_logits, aux_logits, labels, manifest.words())


# =============================================================================
# Fusion
# =============================================================================

def fusion_top1(writer_logits: np.ndarray, labels: np.ndarray, request: FusionRequest) -> float:
    """Mean Top-1 over repetitions of N-image fusion per writer.

    Each repetition draws N distinct test images per writer from
    ``split(f"fusion/{N}/{rep}/{writer}")``, averages their writer-head
    outputs and predicts the arg-max.

    Raises:
        DataError: A writer has fewer than N test images.
    """
    scores = softmax(writer_logits) if request.average == "softmax" else writer_logits
    writers = np.unique(labels)
    if writers.size == 0:
        raise DataError("no test samples to fuse")
    groups = {int(w): np.flatnonzero(labels == w) for w in writers}
    short = [w for w, idx in groups.items() if idx.size < request.n]
    if short:
        raise DataError(f"{len(short)} writers have fewer than {request.n} test images (e.g. class {short[0]})")

    root = RngStream(request.seed)
    per_rep = []
    for rep in range(request.repetitions):
        correct = 0
        for w, idx in groups.items():
            pick = idx[root.split(f"fusion/{request.n}/{rep}/{w}").choice(idx.size, request.n, replace=False)]
            fused = scores[pick].mean(axis=0)
            correct += int(np.argmax(fused) == w)
        per_rep.append(correct / len(groups))
    return float(np.mean(per_rep))


def fuse_evaluate(
    network: Network,
    test_manifest: Manifest,
    request: FusionRequest,
    writer_index: Mapping[str, int],
) -> dict[int, float]:
    """Fusion curve entry ``{N: mean top1}`` for one request."""
    outputs = collect_outputs(network, test_manifest, writer_index)
    return {request.n: fusion_top1(outputs.writer_logits, outputs.writer_labels, request)}


# =============================================================================
# Breakdowns
# =============================================================================

def length_breakdown(writer_logits: np.ndarray, labels: np.ndarray, words: Sequence[str]) -> dict[int, LengthBucket]:
    """Top-1 per word length 1..13; empty buckets are left out."""
    hits = topk_hits(writer_logits, labels, 1)
    lengths = np.array([length_class(w) + 1 for w in words], dtype=np.int64)
    out = {}
    for length in range(1, MAX_WORD_LENGTH + 1):
        mask = lengths == length
        if mask.any():
            out[length] = LengthBucket(count=int(mask.sum()), top1=float(hits[mask].mean()))
    return out


def char_breakdown(writer_logits: np.ndarray, labels: np.ndarray, words: Sequence[str]) -> dict[str, CharBucket]:
    """Top-1 over the words containing each letter; letters never seen are left out."""
    hits = topk_hits(writer_logits, labels, 1)
    presence = np.stack([char_attributes(w) for w in words]).astype(bool) if words else np.zeros((0, NUM_CHARS), bool)
    out = {}
    for i, ch in enumerate(ALPHABET):
        mask = presence[:, i]
        if mask.any():
            out[ch] = CharBucket(count=int(mask.sum()), top1=float(hits[mask].mean()))
    return out


def breakdown_by_length(network: Network, test_manifest: Manifest,
                        writer_index: Mapping[str, int]) -> dict[int, LengthBucket]:
    outputs = collect_outputs(network, test_manifest, writer_index)
    return length_breakdown(outputs.writer_logits, outputs.writer_labels, outputs.words)


def breakdown_by_char(network: Network, test_manifest: Manifest,
                      writer_index: Mapping[str, int]) -> dict[str, CharBucket]:
    outputs = collect_outputs(network, test_manifest, writer_index)
    return char_breakdown(outputs.writer_logits, outputs.writer_labels, outputs.words)


# =============================================================================
# Auxiliary task
# =============================================================================

def _bit_metrics(logits: np.ndarray, targets: np.ndarray) -> tuple[float, float]:
    pred = sigmoid(logits) >= 0.5
    truth = targets.astype(bool)
    return float((pred == truth).mean()), float((pred == truth).all(axis=1).mean())


def aux_metrics(
    aux_logits: np.ndarray,
    words: Sequence[str],
    spec: AuxHeadSpec,
    vocab: Optional[Mapping[str, int]] = None,
) -> dict[str, float]:
    """Accuracy of the auxiliary head.

    Word and length heads report Top-1/Top-5; the letter head reports
    per-bit accuracy at 0.5 and exact-match; the combined head reports
    per-bit accuracy on its 26 letter bins plus Top-1 on the length and word
    sub-blocks. Word-based metrics only count in-vocabulary words.
    """
    aux_logits = np.asarray(aux_logits)
    vocab = vocab or {}
    if spec.task == AuxTask.LENGTH:
        y = np.array([length_class(w) for w in words], dtype=np.int64)
        k5 = min(5, aux_logits.shape[1])
        return {"top1": topk_accuracy(aux_logits, y, 1), "top5": topk_accuracy(aux_logits, y, k5)}
    if spec.task == AuxTask.CHARS:
        targets = np.stack([char_attributes(w) for w in words])
        bit_acc, exact = _bit_metrics(aux_logits, targets)
        return {"bit_accuracy": bit_acc, "exact_match": exact}

    known = np.array([w in vocab for w in words], dtype=bool)
    y_word = np.array([vocab.get(w, -1) for w in words], dtype=np.int64)
    if spec.task == AuxTask.WORD:
        if not known.any():
            return {"top1": 0.0, "top5": 0.0, "coverage": 0.0}
        k5 = min(5, aux_logits.shape[1])
        return {
            "top1": topk_accuracy(aux_logits[known], y_word[known], 1),
            "top5": topk_accuracy(aux_logits[known], y_word[known], k5),
            "coverage": float(known.mean()),
        }

    chars = np.stack([char_attributes(w) for w in words])
    char_block = aux_logits[:, :NUM_CHARS]
    length_block = aux_logits[:, NUM_CHARS:NUM_CHARS + MAX_WORD_LENGTH]
    word_block = aux_logits[:, NUM_CHARS + MAX_WORD_LENGTH:]
    y_len = np.array([length_class(w) for w in words], dtype=np.int64)
    bit_acc, _ = _bit_metrics(char_block, chars)
    out = {"char_bit_accuracy": bit_acc, "length_top1": topk_accuracy(length_block, y_len, 1)}
    out["word_top1"] = topk_accuracy(word_block[known], y_word[known], 1) if known.any() else 0.0
    return out


# =============================================================================
# Full report
# =============================================================================

def evaluate(
    network: Network,
    manifest: Manifest,
    writer_index: Mapping[str, int],
    vocab: Optional[Mapping[str, int]] = None,
    fuse_n: Sequence[int] = DEFAULT_FUSE_N,
    repetitions: int = 20,
    seed: int = 0,
    average: Literal["softmax", "logits"] = "softmax",
    train_manifest: Optional[Manifest] = None,
) -> MetricsReport:
    """Compute every metric from one forward pass over *manifest*.

    Raises:
        DataError: Unknown test writers, or too few images for a fusion size.
    """
    if train_manifest is not None:
        check_closed_set(train_manifest, manifest)
    outputs = collect_outputs(network, manifest, writer_index)
    k5 = min(5, outputs.writer_logits.shape[1])
    report = MetricsReport(
        top1=topk_accuracy(outputs.writer_logits, outputs.writer_labels, 1),
        top5=topk_accuracy(outputs.writer_logits, outputs.writer_labels, k5),
        num_samples=len(manifest),
        num_writers=len(set(outputs.writer_labels.tolist())),
        aux=aux_metrics(outputs.aux_logits, outputs.words, network.config.aux_head, vocab),
        per_length=length_breakdown(outputs.writer_logits, outputs.writer_labels, outputs.words),
        per_char=char_breakdown(outputs.writer_logits, outputs.writer_labels, outputs.words),
    )
    for n in sorted(set(fuse_n)):
        request = FusionRequest(n=n, repetitions=repetitions, seed=seed, average=average)
        report.fusion_curve[n] = fusion_top1(outputs.writer_logits, outputs.writer_labels, request)
    logger.info("top1 %.4f top5 %.4f over %d samples", report.top1, report.top5, report.num_samples)
    return report


def _write_rows(path: Path, header: Sequence[str], rows: Sequence[Sequence[object]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def write_report_csvs(report: MetricsReport, out_dir: Path, task: str = "writer") -> list[Path]:
    """Write metrics.csv, fusion.csv, by_length.csv and by_char.csv into *out_dir*."""
    out_dir = Path(out_dir)
    files = {
        "metrics.csv": (
            ("task", "metric", "value"),
            [(task, "top1", report.top1), (task, "top5", report.top5)]
            + [("aux", name, value) for name, value in sorted(report.aux.items())],
        ),
        "fusion.csv": (("n", "top1"), sorted(report.fusion_curve.items())),
        "by_length.csv": (
            ("length", "count", "top1", "low_support"),
            [(n, b.count, b.top1, int(b.low_support)) for n, b in sorted(report.per_length.items())],
        ),
        "by_char.csv": (("char", "count", "top1"), [(c, b.count, b.top1) for c, b in sorted(report.per_char.items())]),
    }
    written = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, (header, rows) in files.items():
            _write_rows(out_dir / name, header, rows)
            written.append(out_dir / name)
    except OSError as exc:
        raise StorageError(f"cannot write metrics into {out_dir}: {exc}") from exc
    return written
