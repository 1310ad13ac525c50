"""Auxiliary-task labels, the λ schedule and the joint loss.

A word string yields every explicit attribute used as an auxiliary target:
its vocabulary index, its length class and a 26-bin letter-presence vector
(the first level of a PHOC). Letters are case-folded and everything that is
not a-z is dropped before counting.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np
from pydantic import BaseModel, Field, model_validator

from .core import Tensor, scale_add
from .errors import DataError, ParameterError, StorageError, VocabularyError

ALPHABET = "abcdefghijklmnopqrstuvwxyz"
NUM_CHARS = len(ALPHABET)
MAX_WORD_LENGTH = 13

_CHAR_INDEX = {c: i for i, c in enumerate(ALPHABET)}


class AuxTask(str, Enum):
    """Auxiliary task selected for the second pathway."""

    WORD = "word"
    LENGTH = "length"
    CHARS = "chars"
    COMBINED = "combined"


class LossKind(str, Enum):
    SOFTMAX = "softmax_ce"
    SIGMOID = "sigmoid_bce"


class AuxHeadSpec(BaseModel):
    """Output head of the auxiliary pathway."""

    task: AuxTask = AuxTask.WORD
    vocab_size: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _vocab_needed(self) -> "AuxHeadSpec":
        if self.task in (AuxTask.WORD, AuxTask.COMBINED) and self.vocab_size < 1:
            raise ValueError(f"aux task {self.task.value!r} needs vocab_size >= 1")
        return self

    @property
    def width(self) -> int:
        if self.task == AuxTask.WORD:
            return self.vocab_size
        if self.task == AuxTask.LENGTH:
            return MAX_WORD_LENGTH
        if self.task == AuxTask.CHARS:
            return NUM_CHARS
        return NUM_CHARS + MAX_WORD_LENGTH + self.vocab_size

    @property
    def loss_kind(self) -> LossKind:
        if self.task in (AuxTask.WORD, AuxTask.LENGTH):
            return LossKind.SOFTMAX
        return LossKind.SIGMOID


@dataclass(frozen=True)
class LabelSet:
    """Every label derived from one (word, writer) pair."""

    writer_class: int
    word_class: int
    length_class: int
    char_attrs: np.ndarray
    combined_attrs: np.ndarray

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabelSet):
            return NotImplemented
        return (
            self.writer_class == other.writer_class
            and self.word_class == other.word_class
            and self.length_class == other.length_class
            and np.array_equal(self.char_attrs, other.char_attrs)
            and np.array_equal(self.combined_attrs, other.combined_attrs)
        )

    __hash__ = None  # type: ignore[assignment]


# =============================================================================
# Vocabulary
# =============================================================================

def build_vocab(words: Iterable[str], min_instances: int = 20) -> dict[str, int]:
    """Keep the words occurring at least *min_instances* times, indexed in sorted order."""
    if min_instances < 1:
        raise ParameterError(f"min_instances must be >= 1, got {min_instances}")
    counts = Counter(words)
    kept = sorted(w for w, c in counts.items() if c >= min_instances)
    if not kept:
        raise DataError(f"no word occurs at least {min_instances} times")
    return {w: i for i, w in enumerate(kept)}


def save_vocab(path: Path, vocab: Mapping[str, int]) -> None:
    try:
        Path(path).write_text("".join(f"{w}\n" for w in sorted(vocab)), encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot write vocab {path}: {exc}") from exc


def load_vocab(path: Path) -> dict[str, int]:
    """Read a one-word-per-line file; blank lines are skipped, order is re-sorted."""
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise StorageError(f"cannot read vocab {path}: {exc}") from exc
    words = sorted({line.strip() for line in lines if line.strip()})
    if not words:
        raise DataError(f"vocab file {path} is empty")
    return {w: i for i, w in enumerate(words)}


def build_writer_index(writer_ids: Iterable[str]) -> dict[str, int]:
    return {w: i for i, w in enumerate(sorted(set(writer_ids)))}


# =============================================================================
# Label derivation
# =============================================================================

def letters_of(word: str) -> str:
    """Case-folded a-z letters of *word*, everything else removed."""
    return "".join(ch for ch in word.casefold() if ch in _CHAR_INDEX)


def length_class(word: str) -> int:
    letters = letters_of(word)
    if not letters:
        raise DataError(f"word {word!r} has no letters")
    return min(len(letters), MAX_WORD_LENGTH) - 1


def char_attributes(word: str) -> np.ndarray:
    """26-bin presence vector; order and multiplicity are ignored."""
    letters = letters_of(word)
    if not letters:
        raise DataError(f"word {word!r} has no letters")
    bits = np.zeros(NUM_CHARS, dtype=np.uint8)
    for ch in set(letters):
        bits[_CHAR_INDEX[ch]] = 1
    return bits


def combined_attributes(chars: np.ndarray, length_cls: int, word_cls: int, vocab_size: int) -> np.ndarray:
    """Concatenate [26 letter bits | 13-way length one-hot | vocab one-hot]."""
    out = np.zeros(NUM_CHARS + MAX_WORD_LENGTH + vocab_size, dtype=np.uint8)
    out[:NUM_CHARS] = chars
    out[NUM_CHARS + length_cls] = 1
    out[NUM_CHARS + MAX_WORD_LENGTH + word_cls] = 1
    return out


def derive_labels(word: str, writer_class: int, vocab: Mapping[str, int]) -> LabelSet:
    """Derive the full LabelSet for one sample.

    Args:
        word: Transcription as stored in the manifest.
        writer_class: Index of the writer among the training writers.
        vocab: Word-to-index map from :func:`build_vocab`.

    Raises:
        DataError: No letters remain after stripping.
        VocabularyError: The word is not in the vocabulary.
    """
    length_cls = length_class(word)
    chars = char_attributes(word)
    if word not in vocab:
        raise VocabularyError(f"word {word!r} is not in the vocabulary")
    word_cls = vocab[word]
    return LabelSet(
        writer_class=int(writer_class),
        word_class=int(word_cls),
        length_class=length_cls,
        char_attrs=chars,
        combined_attrs=combined_attributes(chars, length_cls, word_cls, len(vocab)),
    )


def aux_targets(labels: Sequence[LabelSet], spec: AuxHeadSpec) -> np.ndarray:
    """Stack the per-sample targets the auxiliary head is trained on."""
    if spec.task == AuxTask.WORD:
        return np.array([ls.word_class for ls in labels], dtype=np.int64)
    if spec.task == AuxTask.LENGTH:
        return np.array([ls.length_class for ls in labels], dtype=np.int64)
    if spec.task == AuxTask.CHARS:
        return np.stack([ls.char_attrs for ls in labels]).astype(np.float64)
    return np.stack([ls.combined_attrs for ls in labels]).astype(np.float64)


# =============================================================================
# Loss weighting
# =============================================================================

class LossSchedule(BaseModel):
    """Step ramp of the writer-loss weight λ."""

    initial: float = Field(default=0.5, ge=0.0, le=1.0)
    warmup_iterations: int = Field(default=10_000, ge=0)
    increment: float = Field(default=0.066, ge=0.0)
    interval: int = Field(default=5_000, ge=1)
    cap: float = Field(default=0.9, ge=0.0, le=1.0)

    @model_validator(mode="after")
    def _cap_above_initial(self) -> "LossSchedule":
        if self.cap < self.initial:
            raise ValueError(f"cap {self.cap} is below initial {self.initial}")
        return self

    @classmethod
    def constant(cls, value: float) -> "LossSchedule":
        """Fixed λ; ``constant(1.0)`` trains the writer pathway alone."""
        return cls(initial=value, warmup_iterations=0, increment=0.0, interval=1, cap=value)

    @classmethod
    def scaled(cls, iterations: int) -> "LossSchedule":
        """Schedule with warmup at 25 % and interval at 12.5 % of *iterations*."""
        return cls(
            warmup_iterations=max(0, round(0.25 * iterations)),
            interval=max(1, round(0.125 * iterations)),
        )


def loss_lambda(iteration: int, schedule: LossSchedule) -> float:
    if iteration < 0:
        raise ParameterError(f"iteration must be >= 0, got {iteration}")
    if iteration < schedule.warmup_iterations:
        return schedule.initial
    steps = math.floor((iteration - schedule.warmup_iterations) / schedule.interval) + 1
    # rounding keeps 0.5 + k*0.066 on the decimal grid
    return round(min(schedule.cap, schedule.initial + schedule.increment * steps), 12)


def joint_loss(writer_loss: Tensor, aux_loss: Tensor, lam: float) -> Tensor:
    """``(1 - λ) * aux_loss + λ * writer_loss``."""
    if not 0.0 <= lam <= 1.0:
        raise ParameterError(f"loss weight must lie in [0, 1], got {lam}")
    return scale_add(aux_loss, writer_loss, 1.0 - lam, lam)


def schedule_boundaries(iterations: int, schedule: LossSchedule) -> list[int]:
    """Iterations below *iterations* where λ may change: 0, the end of warmup, then every interval."""
    if iterations < 1:
        raise ParameterError(f"iterations must be >= 1, got {iterations}")
    points = {0}
    it = schedule.warmup_iterations
    while it < iterations:
        points.add(it)
        it += schedule.interval
    return sorted(points)
