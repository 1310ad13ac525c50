"""Exception hierarchy.

Every error raised on purpose by the package derives from ``DeepAdaptError``
and carries the process exit code the CLI should use for it.
"""

from __future__ import annotations

from typing import Optional


class ExitCode:
    """Process exit codes used by the CLI."""

    SUCCESS = 0
    FAILURE = 1
    USAGE = 2
    DATA = 3
    CHECKPOINT = 4
    DIVERGENCE = 5


class DeepAdaptError(Exception):
    """Base class for all package errors."""

    exit_code = ExitCode.FAILURE


class DimensionError(DeepAdaptError, ValueError):
    """Tensor shapes do not fit together."""


class ParameterError(DeepAdaptError, ValueError):
    """A scalar argument is outside its allowed range."""


class LabelError(DeepAdaptError, ValueError):
    """Class index or target outside the head's range."""


class ConfigurationError(DeepAdaptError, ValueError):
    """Invalid network, training or run configuration."""

    exit_code = ExitCode.USAGE


class DataError(DeepAdaptError, ValueError):
    """Corpus, manifest or label data cannot be used."""

    exit_code = ExitCode.DATA


class VocabularyError(DataError):
    """Word not present in the vocabulary."""


class GlyphError(DataError):
    """Word cannot be rendered by the synthetic generator."""


class StorageError(DeepAdaptError, OSError):
    """File could not be read or written."""

    exit_code = ExitCode.DATA


class CheckpointError(DeepAdaptError):
    """Checkpoint is malformed or incompatible with the data."""

    exit_code = ExitCode.CHECKPOINT


class DivergenceError(DeepAdaptError):
    """Training produced a non-finite loss."""

    exit_code = ExitCode.DIVERGENCE

    def __init__(self, iteration: int, message: Optional[str] = None) -> None:
        self.iteration = iteration
        super().__init__(message or f"non-finite loss at iteration {iteration}")
