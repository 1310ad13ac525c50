"""Run configuration.

A run config is a flat ``key = value`` text file; ``#`` starts a comment and
blank lines are ignored. Every key is also a command-line flag, and flags
given on the command line win over the file. The resolved configuration is
echoed as ``config.resolved`` into each run directory in the same format.
"""

from __future__ import annotations

import datetime
import os
from pathlib import Path
from typing import Any, Literal, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .errors import ConfigurationError, StorageError
from .labels import AuxHeadSpec, AuxTask, LossSchedule
from .net import ADAPTABLE_BLOCKS, AdaptiveMode, NetworkConfig, Precision
from .trainer import TrainConfig

RUN_ROOT_ENV = "DEEPADAPT_RUN_ROOT"
DEFAULT_RUN_ROOT = "runs"
RESOLVED_FILE = "config.resolved"


def _int_tuple(value: Any) -> Any:
    if isinstance(value, str):
        parts = [p.strip() for p in value.split(",") if p.strip()]
        try:
            return tuple(int(p) for p in parts)
        except ValueError as exc:
            raise ValueError(f"expected comma-separated integers, got {value!r}") from exc
    return value


class RunConfig(BaseModel):
    """Everything one train/eval run needs besides the data itself."""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)

    # data
    data_dir: Optional[str] = None
    train_manifest: str = "train.tsv"
    test_manifest: str = "test.tsv"
    min_word_instances: int = Field(default=20, ge=1)

    # network
    input_height: int = Field(default=40, ge=1)
    input_width: int = Field(default=120, ge=1)
    channels: tuple[int, int, int, int] = (64, 128, 256, 512)
    fc_widths: tuple[int, int] = (1024, 1024)
    mode: AdaptiveMode = AdaptiveMode.BASELINE
    adaptive_blocks: tuple[int, ...] = ADAPTABLE_BLOCKS
    aux: AuxTask = AuxTask.WORD
    leaky_slope: float = 0.1
    dropout_rate: float = 0.5
    precision: Precision = Precision.DOUBLE
    conv_method: Literal["direct", "gemm"] = "gemm"

    # training
    iterations: int = Field(default=2000, ge=1)
    batch_size: int = Field(default=32, ge=1)
    learning_rate: float = Field(default=1e-4, ge=0.0)
    schedule: Literal["scaled", "full"] = "scaled"
    single_task: bool = False
    seed: int = 0
    checkpoint_every: int = Field(default=0, ge=0)
    log_every: int = Field(default=10, ge=1)
    stop_at: Optional[int] = Field(default=None, ge=1)

    # evaluation
    fuse_n: tuple[int, ...] = (1, 2, 3, 4, 5)
    fuse_repetitions: int = Field(default=20, ge=1)
    fuse_average: Literal["softmax", "logits"] = "softmax"
    eval_seed: int = 0

    @field_validator("channels", "fc_widths", "adaptive_blocks", "fuse_n", mode="before")
    @classmethod
    def _split_lists(cls, value: Any) -> Any:
        return _int_tuple(value)

    # -- sources --------------------------------------------------------------

    @classmethod
    def from_sources(cls, path: Optional[Path] = None, overrides: Optional[Mapping[str, Any]] = None) -> "RunConfig":
        """Merge defaults, the config file at *path* and non-None *overrides*.

        Raises:
            ConfigurationError: Unknown keys or invalid values.
            StorageError: The file cannot be read.
        """
        values: dict[str, Any] = dict(parse_config_file(path)) if path is not None else {}
        values.update({k: v for k, v in (overrides or {}).items() if v is not None})
        try:
            return cls.model_validate(values)
        except ValidationError as exc:
            raise ConfigurationError(_describe(exc)) from exc

    def to_text(self, notes: Optional[Mapping[str, Any]] = None) -> str:
        return format_resolved(self.model_dump(mode="json"), notes)

    def write_resolved(self, run_dir: Path, notes: Optional[Mapping[str, Any]] = None) -> Path:
        return write_resolved(run_dir, self.model_dump(mode="json"), notes)

    # -- derived configs -------------------------------------------------------

    def network_config(self, writer_classes: int, vocab_size: int) -> NetworkConfig:
        try:
            aux_vocab = vocab_size if self.aux in (AuxTask.WORD, AuxTask.COMBINED) else 0
            return NetworkConfig(
                input_height=self.input_height,
                input_width=self.input_width,
                channels_per_block=self.channels,
                fc_widths=self.fc_widths,
                writer_classes=writer_classes,
                aux_head=AuxHeadSpec(task=self.aux, vocab_size=aux_vocab),
                adaptive_mode=self.mode,
                adaptive_block_indices=self.adaptive_blocks,
                leaky_slope=self.leaky_slope,
                dropout_rate=self.dropout_rate,
                precision=self.precision,
                conv_method=self.conv_method,
            )
        except ValidationError as exc:
            raise ConfigurationError(_describe(exc)) from exc

    def loss_schedule(self) -> LossSchedule:
        if self.single_task:
            return LossSchedule.constant(1.0)
        if self.schedule == "full":
            return LossSchedule()
        return LossSchedule.scaled(self.iterations)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            iterations=self.iterations,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            schedule=self.loss_schedule(),
            seed=self.seed,
            checkpoint_every=self.checkpoint_every,
            log_every=self.log_every,
            stop_at=self.stop_at,
        )


def _describe(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"]) or "config"
        if err["type"] == "extra_forbidden":
            parts.append(f"unknown key {loc!r}")
        else:
            parts.append(f"{loc}: {err['msg']}")
    return "; ".join(parts)


def format_resolved(values: Mapping[str, Any], notes: Optional[Mapping[str, Any]] = None) -> str:
    """Render *values* as ``key = value`` lines; *notes* become leading ``#`` comment lines."""
    lines = [f"# {key} = {value}" for key, value in (notes or {}).items()]
    for key, value in values.items():
        if value is None:
            continue
        if isinstance(value, (list, tuple)):
            value = ",".join(str(v) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def write_resolved(run_dir: Path, values: Mapping[str, Any], notes: Optional[Mapping[str, Any]] = None) -> Path:
    """Write ``config.resolved`` into *run_dir*."""
    path = Path(run_dir) / RESOLVED_FILE
    try:
        path.write_text(format_resolved(values, notes), encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot write {path}: {exc}") from exc
    return path


def parse_config_file(path: Path) -> dict[str, str]:
    """Read ``key = value`` lines into a dict of raw strings.

    Raises:
        ConfigurationError: A line without ``=`` or a repeated key.
        StorageError: The file cannot be read.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot read config {path}: {exc}") from exc
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip().replace("-", "_")
        if not sep or not key:
            raise ConfigurationError(f"{path}:{lineno}: expected key = value, got {raw.strip()!r}")
        if key in values:
            raise ConfigurationError(f"{path}:{lineno}: key {key!r} given twice")
        values[key] = value.strip()
    return values


def default_run_root() -> Path:
    return Path(os.environ.get(RUN_ROOT_ENV) or DEFAULT_RUN_ROOT)


def make_run_dir(out_dir: Optional[Path] = None) -> Path:
    """Create and return *out_dir*, or a timestamped directory under the run root."""
    if out_dir is None:
        ts = datetime.datetime.now().strftime("%Y%m%d_%H%M%S")
        out_dir = default_run_root() / ts
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StorageError(f"cannot create run directory {out_dir}: {exc}") from exc
    return out_dir
