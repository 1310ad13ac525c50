"""Joint training of the writer and auxiliary pathways.

Per iteration ``it`` the batch indices come from ``split(f"batch/{it}")``
and the dropout masks from ``split(f"dropout/{it}")`` of the run seed, so a
run resumed from a checkpoint replays exactly the draws an uninterrupted run
would have made.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Literal, Mapping, Optional

import numpy as np
from pydantic import BaseModel, Field, ValidationError

from .audit import AuditLog, emit
from .core import (
    AdamState,
    RngStream,
    Tape,
    Tensor,
    adam_step,
    sigmoid_binary_cross_entropy,
    softmax_cross_entropy,
)
from .data import Manifest
from .errors import CheckpointError, ConfigurationError, DivergenceError, StorageError
from .labels import (
    AuxHeadSpec,
    AuxTask,
    LabelSet,
    LossKind,
    LossSchedule,
    aux_targets,
    build_vocab,
    build_writer_index,
    derive_labels,
    joint_loss,
    loss_lambda,
)
from .net import Network, NetworkConfig, load_network, save_network

logger = logging.getLogger(__name__)

TRAIN_LOG_FIELDS = ("iteration", "loss_total", "loss_writer", "loss_aux", "lambda", "wall_time_s")
FINAL_CHECKPOINT = "checkpoint_final"
CHECKPOINT_DIR = "checkpoints"
_ADAM_M = "adam.m/"
_ADAM_V = "adam.v/"


class TrainConfig(BaseModel):
    """Optimisation settings.

    When ``schedule`` is omitted the λ ramp is scaled to ``iterations``.
    ``checkpoint_every = 0`` writes only the final checkpoint. ``stop_at``
    halts a run early while the λ ramp still spans ``iterations``; resuming
    the resulting checkpoint completes the run.
    """

    iterations: int = Field(default=2000, ge=1)
    batch_size: int = Field(default=32, ge=1)
    learning_rate: float = Field(default=1e-4, ge=0.0)
    schedule: Optional[LossSchedule] = None
    seed: int = 0
    checkpoint_every: int = Field(default=0, ge=0)
    log_every: int = Field(default=10, ge=1)
    traversal: Literal["recorded", "dfs"] = "recorded"
    stop_at: Optional[int] = Field(default=None, ge=1)

    def resolved_schedule(self) -> LossSchedule:
        return self.schedule if self.schedule is not None else LossSchedule.scaled(self.iterations)

    @property
    def end(self) -> int:
        """Iteration at which this invocation stops."""
        return self.iterations if self.stop_at is None else min(self.stop_at, self.iterations)


@dataclass
class TrainLogRow:
    iteration: int
    loss_total: float
    loss_writer: float
    loss_aux: float
    current_lambda: float
    wall_time: float


@dataclass
class TrainLog:
    rows: list[TrainLogRow] = field(default_factory=list)

    def append(self, row: TrainLogRow) -> None:
        if self.rows and row.iteration <= self.rows[-1].iteration:
            raise ValueError(f"log iterations must increase: {row.iteration} after {self.rows[-1].iteration}")
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def write_csv(self, path: Path) -> Path:
        """Write rows under the header ``iteration,loss_total,loss_writer,loss_aux,lambda,wall_time_s``."""
        path = Path(path)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="") as f:
                writer = csv.writer(f)
                writer.writerow(TRAIN_LOG_FIELDS)
                for r in self.rows:
                    writer.writerow(
                        [r.iteration, repr(r.loss_total), repr(r.loss_writer), repr(r.loss_aux),
                         repr(r.current_lambda), f"{r.wall_time:.3f}"]
                    )
        except OSError as exc:
            raise StorageError(f"cannot write training log {path}: {exc}") from exc
        return path


@dataclass
class TrainingSet:
    """Images and labels held in memory for batch sampling."""

    images: np.ndarray
    labels: list[LabelSet]
    writer_index: dict[str, int]
    vocab: dict[str, int]

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def from_manifest(
        cls,
        manifest: Manifest,
        config: NetworkConfig,
        vocab: Optional[Mapping[str, int]] = None,
        writer_index: Optional[Mapping[str, int]] = None,
    ) -> "TrainingSet":
        """Load images and derive labels.

        Without an explicit *vocab* every manifest word is kept; without an
        explicit *writer_index* writers are indexed in sorted order.

        Raises:
            DataError: A label cannot be derived.
        """
        writer_index = dict(writer_index) if writer_index is not None else build_writer_index(manifest.writers())
        vocab = dict(vocab) if vocab is not None else build_vocab(manifest.words(), min_instances=1)
        labels = []
        for rec in manifest:
            if rec.writer_id not in writer_index:
                raise ConfigurationError(f"writer {rec.writer_id!r} has no class index")
            labels.append(derive_labels(rec.word, writer_index[rec.writer_id], vocab))
        images = manifest.load_images(config.input_height, config.input_width).astype(config.dtype)
        return cls(images=images, labels=labels, writer_index=writer_index, vocab=vocab)


@dataclass
class TrainResult:
    network: Network
    log: TrainLog
    adam: AdamState
    iteration: int


def restrict_to_vocab(manifest: Manifest, vocab: Mapping[str, int]) -> Manifest:
    """Drop records whose word is outside *vocab*."""
    kept = [rec for rec in manifest if rec.word in vocab]
    dropped = len(manifest) - len(kept)
    if dropped:
        logger.info("dropped %d of %d samples with out-of-vocabulary words", dropped, len(manifest))
    return Manifest(records=kept, root=manifest.root, split=manifest.split)


def check_heads(config: NetworkConfig, writer_index: Mapping[str, int], vocab: Mapping[str, int]) -> None:
    """The writer head must match the writer count and vocabulary heads the vocabulary."""
    if config.writer_classes != len(writer_index):
        raise ConfigurationError(
            f"network has {config.writer_classes} writer classes, data has {len(writer_index)} writers"
        )
    if config.aux_head.task in (AuxTask.WORD, AuxTask.COMBINED) and config.aux_head.vocab_size != len(vocab):
        raise ConfigurationError(
            f"aux head vocab_size {config.aux_head.vocab_size} differs from vocabulary size {len(vocab)}"
        )


def aux_loss(logits: Tensor, labels: list[LabelSet], spec: AuxHeadSpec) -> Tensor:
    targets = aux_targets(labels, spec)
    if spec.loss_kind == LossKind.SOFTMAX:
        return softmax_cross_entropy(logits, targets)
    return sigmoid_binary_cross_entropy(logits, targets)


def _training_meta(data: TrainingSet, config: TrainConfig, schedule: LossSchedule, iteration: int,
                   adam: AdamState) -> dict:
    return {
        "iteration": iteration,
        "train": config.model_dump(mode="json"),
        "schedule": schedule.model_dump(mode="json"),
        "adam": {
            "step": adam.step,
            "learning_rate": adam.learning_rate,
            "beta1": adam.beta1,
            "beta2": adam.beta2,
            "epsilon": adam.epsilon,
        },
        "writers": sorted(data.writer_index, key=data.writer_index.__getitem__),
        "vocab": sorted(data.vocab, key=data.vocab.__getitem__),
    }


def write_checkpoint(path: Path, network: Network, data: TrainingSet, config: TrainConfig,
                     schedule: LossSchedule, iteration: int, adam: AdamState) -> Path:
    """Save parameters, Adam moments, the λ schedule and the label maps needed to resume or evaluate."""
    extra = {}
    for name, m in adam.first_moment.items():
        extra[_ADAM_M + name] = m
        extra[_ADAM_V + name] = adam.second_moment[name]
    meta = _training_meta(data, config, schedule, iteration, adam)
    return save_network(path, network, meta=meta, extra_tensors=extra)


def _finish(
    out_dir: Path,
    network: Network,
    data: TrainingSet,
    config: TrainConfig,
    schedule: LossSchedule,
    iteration: int,
    adam: AdamState,
    log: TrainLog,
    audit: Optional[AuditLog],
) -> None:
    ck = write_checkpoint(Path(out_dir) / FINAL_CHECKPOINT, network, data, config, schedule, iteration, adam)
    log.write_csv(Path(out_dir) / "train_log.csv")
    emit(audit, "checkpoint", {"iteration": iteration, "path": str(ck), "final": True})


def _run(
    network: Network,
    data: TrainingSet,
    config: TrainConfig,
    schedule: LossSchedule,
    adam: AdamState,
    start: int,
    out_dir: Optional[Path],
    audit: Optional[AuditLog],
) -> TrainResult:
    cfg = network.config
    check_heads(cfg, data.writer_index, data.vocab)
    if config.batch_size > len(data):
        raise ConfigurationError(f"batch_size {config.batch_size} exceeds training set size {len(data)}")

    root = RngStream(config.seed)
    log = TrainLog()
    writer_y_all = np.array([ls.writer_class for ls in data.labels], dtype=np.int64)
    clock = time.perf_counter()
    end = config.end
    if start >= end:
        logger.info("checkpoint is at iteration %d of %d; nothing to train", start, end)
        if out_dir is not None:
            _finish(out_dir, network, data, config, schedule, start, adam, log, audit)
        return TrainResult(network=network, log=log, adam=adam, iteration=start)

    logger.info("training %s iterations %d..%d of %d (batch %d)", cfg.adaptive_mode.value, start, end,
                config.iterations, config.batch_size)
    for it in range(start, end):
        lam = loss_lambda(it, schedule)
        idx = root.split(f"batch/{it}").integers(0, len(data), config.batch_size)
        batch_labels = [data.labels[i] for i in idx]

        network.zero_grad()
        with Tape() as tape:
            writer_logits, aux_logits = network.forward(data.images[idx], training=True,
                                                        rng=root.split(f"dropout/{it}"))
            writer_loss = softmax_cross_entropy(writer_logits, writer_y_all[idx])
            a_loss = aux_loss(aux_logits, batch_labels, cfg.aux_head)
            loss = joint_loss(writer_loss, a_loss, lam)
        if not loss.is_finite():
            emit(audit, "run_error", {"error": "divergence", "iteration": it})
            raise DivergenceError(it)
        tape.backward(loss, config.traversal)
        grads = {name: p.grad for name, p in network.parameters() if p.grad is not None}
        adam_step(network.params, grads, adam)

        done = it + 1
        if it % config.log_every == 0 or done == end:
            row = TrainLogRow(it, loss.item(), writer_loss.item(), a_loss.item(), lam, time.perf_counter() - clock)
            log.append(row)
            logger.debug("iter %d loss %.5f (writer %.5f, aux %.5f, lambda %.3f)",
                         it, row.loss_total, row.loss_writer, row.loss_aux, lam)
            emit(audit, "train_progress", asdict(row))
        if out_dir is not None and config.checkpoint_every and done % config.checkpoint_every == 0 and done < end:
            ck = write_checkpoint(Path(out_dir) / CHECKPOINT_DIR / f"iter_{done:07d}", network, data, config,
                                  schedule, done, adam)
            emit(audit, "checkpoint", {"iteration": done, "path": str(ck)})

    if out_dir is not None:
        _finish(out_dir, network, data, config, schedule, end, adam, log, audit)
    return TrainResult(network=network, log=log, adam=adam, iteration=end)


def train(
    network: Network,
    data: TrainingSet,
    config: TrainConfig,
    out_dir: Optional[Path] = None,
    audit: Optional[AuditLog] = None,
) -> TrainResult:
    """Train *network* in place from iteration 0.

    Args:
        network: Freshly built network whose heads match *data*.
        data: Training images and labels.
        config: Optimisation settings.
        out_dir: When given, periodic checkpoints, the final checkpoint and
            ``train_log.csv`` are written here.
        audit: Optional run audit receiving ``train_progress`` and
            ``checkpoint`` events.

    Raises:
        ConfigurationError: Head sizes or batch size do not fit the data.
        DivergenceError: The loss became non-finite.
    """
    adam = AdamState(learning_rate=config.learning_rate)
    return _run(network, data, config, config.resolved_schedule(), adam, 0, out_dir, audit)


def load_training_state(checkpoint: Path) -> tuple[Network, dict, AdamState]:
    """Load a training checkpoint: network, metadata and optimizer state."""
    network, meta, extra = load_network(checkpoint)
    if "iteration" not in meta or "adam" not in meta:
        raise CheckpointError(f"{checkpoint} holds no training state")
    a = meta["adam"]
    adam = AdamState(
        learning_rate=a["learning_rate"], beta1=a["beta1"], beta2=a["beta2"], epsilon=a["epsilon"], step=a["step"]
    )
    for name, p in network.parameters():
        m = extra.get(_ADAM_M + name)
        v = extra.get(_ADAM_V + name)
        if m is None or v is None:
            if adam.step:
                raise CheckpointError(f"{checkpoint} lacks Adam moments for {name!r}")
            continue
        adam.first_moment[name] = m.astype(p.dtype)
        adam.second_moment[name] = v.astype(p.dtype)
    return network, meta, adam


def resume(
    checkpoint: Path,
    data: TrainingSet,
    config: TrainConfig,
    out_dir: Optional[Path] = None,
    audit: Optional[AuditLog] = None,
) -> TrainResult:
    """Continue training from *checkpoint* up to ``config.end``.

    The λ schedule is the one stored with the checkpoint, so a run stopped
    early with ``stop_at`` and resumed here matches an uninterrupted run.
    At or past the end nothing is trained; with *out_dir* the checkpoint
    state is still written there as the final checkpoint.

    Raises:
        CheckpointError: The checkpoint's writers or vocabulary disagree with
            *data*, or it holds no training state.
    """
    network, meta, adam = load_training_state(checkpoint)
    writers = sorted(data.writer_index, key=data.writer_index.__getitem__)
    vocab = sorted(data.vocab, key=data.vocab.__getitem__)
    if meta.get("writers") != writers:
        raise CheckpointError(f"checkpoint has {len(meta.get('writers', []))} writers, data has {len(writers)}")
    if meta.get("vocab") != vocab:
        raise CheckpointError(f"checkpoint vocabulary has {len(meta.get('vocab', []))} words, data has {len(vocab)}")
    try:
        check_heads(network.config, data.writer_index, data.vocab)
    except ConfigurationError as exc:
        raise CheckpointError(str(exc)) from exc
    adam.learning_rate = config.learning_rate
    return _run(network, data, config, _resume_schedule(meta, config), adam, int(meta["iteration"]), out_dir, audit)


def _resume_schedule(meta: dict, config: TrainConfig) -> LossSchedule:
    """The λ schedule stored with the checkpoint; *config* only fills in for checkpoints without one."""
    requested = config.resolved_schedule()
    if "schedule" not in meta:
        return requested
    try:
        stored = LossSchedule.model_validate(meta["schedule"])
    except ValidationError as exc:
        raise CheckpointError(f"checkpoint holds an invalid loss schedule: {exc}") from exc
    if stored != requested:
        logger.warning("continuing with the checkpoint's loss schedule %s; requested %s is ignored",
                       stored.model_dump(), requested.model_dump())
    return stored
