"""Benchmark pipeline state definitions."""

from __future__ import annotations

import operator
from typing import Annotated, Optional, TypedDict

from pydantic import BaseModel, Field, field_validator

from .labels import AuxTask
from .net import AdaptiveMode


class BenchmarkPlan(BaseModel):
    """A desk-scale comparison of adaptive modes over several seeds."""

    modes: list[AdaptiveMode] = [AdaptiveMode.BASELINE, AdaptiveMode.LINEAR, AdaptiveMode.DEEP]
    seeds: list[int] = [0, 1, 2]
    aux: AuxTask = AuxTask.WORD
    writers: int = Field(default=50, ge=2)
    words_per_writer: int = Field(default=40, ge=2)
    train_fraction: float = Field(default=0.71, gt=0.0, lt=1.0)
    min_word_instances: int = Field(default=10, ge=1)
    data_seed: int = 0
    iterations: int = Field(default=2000, ge=1)
    batch_size: int = Field(default=32, ge=1)
    learning_rate: float = Field(default=1e-4, ge=0.0)
    channels: tuple[int, int, int, int] = (16, 32, 64, 64)
    fc_widths: tuple[int, int] = (256, 256)
    fuse_n: list[int] = [1, 5]
    repetitions: int = Field(default=20, ge=1)

    @field_validator("modes", "seeds", "fuse_n")
    @classmethod
    def _non_empty(cls, value: list) -> list:
        if not value:
            raise ValueError("must not be empty")
        return value

    def runs(self) -> list[tuple[AdaptiveMode, int]]:
        """Every (mode, seed) pair in execution order."""
        order = {m: i for i, m in enumerate(AdaptiveMode)}
        modes = sorted(set(self.modes), key=order.__getitem__)
        return [(mode, seed) for mode in modes for seed in sorted(set(self.seeds))]

    @property
    def chance(self) -> float:
        return 1.0 / self.writers


class BenchmarkState(TypedDict):
    """State maintained throughout the benchmark pipeline."""

    plan: BenchmarkPlan

    # Directory receiving data, runs and benchmark.csv
    out_dir: str

    # Manifest paths, vocabulary and writer index written by prepare_data
    data: Optional[dict]

    # Trained runs (accumulates via operator.add)
    runs: Annotated[list[dict], operator.add]

    # Evaluated runs
    results: list[dict]

    summary: Optional[dict]

    # Current phase: "data" | "training" | "evaluating" | "summarizing" | "complete"
    phase: str
