"""Network configuration."""

from __future__ import annotations

from enum import Enum
from typing import Literal

import numpy as np
from pydantic import BaseModel, Field, field_validator

from ..errors import ConfigurationError
from ..labels import AuxHeadSpec

ADAPTABLE_BLOCKS = (2, 3, 4)
NUM_POOLS = 4


class AdaptiveMode(str, Enum):
    """How block-i auxiliary features reach the main pathway."""

    BASELINE = "baseline"  # nothing is transferred
    LINEAR = "linear"      # per-channel mix of main and auxiliary maps
    DEEP = "deep"          # main + conv(leaky(conv(aux)))


class Precision(str, Enum):
    DOUBLE = "double"
    SINGLE = "single"

    @property
    def dtype(self) -> np.dtype:
        return np.dtype(np.float64) if self is Precision.DOUBLE else np.dtype(np.float32)


class NetworkConfig(BaseModel):
    """Full architecture description of the two-pathway network."""

    input_height: int = Field(default=40, ge=1)
    input_width: int = Field(default=120, ge=1)
    channels_per_block: tuple[int, int, int, int] = (64, 128, 256, 512)
    fc_widths: tuple[int, int] = (1024, 1024)
    writer_classes: int = Field(ge=1)
    aux_head: AuxHeadSpec
    adaptive_mode: AdaptiveMode = AdaptiveMode.BASELINE
    adaptive_block_indices: tuple[int, ...] = ADAPTABLE_BLOCKS
    leaky_slope: float = Field(default=0.1, gt=0.0, lt=1.0)
    dropout_rate: float = Field(default=0.5, ge=0.0, lt=1.0)
    precision: Precision = Precision.DOUBLE
    conv_method: Literal["direct", "gemm"] = "gemm"

    @field_validator("channels_per_block", "fc_widths")
    @classmethod
    def _positive(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        if any(v < 1 for v in value):
            raise ValueError(f"all widths must be positive, got {value}")
        return value

    @field_validator("adaptive_block_indices")
    @classmethod
    def _adaptable(cls, value: tuple[int, ...]) -> tuple[int, ...]:
        bad = [i for i in value if i not in ADAPTABLE_BLOCKS]
        if bad:
            raise ValueError(f"adaptive blocks must be a subset of {ADAPTABLE_BLOCKS}, got {bad}")
        return tuple(sorted(set(value)))

    @property
    def dtype(self) -> np.dtype:
        return self.precision.dtype

    @property
    def active_blocks(self) -> tuple[int, ...]:
        """Blocks whose output is adapted; empty in Baseline mode."""
        if self.adaptive_mode == AdaptiveMode.BASELINE:
            return ()
        return self.adaptive_block_indices

    def block_channels(self, block: int) -> int:
        return self.channels_per_block[block - 1]

    def feature_map_size(self) -> tuple[int, int]:
        """Spatial size of the last block's maps after four 2x2 pools."""
        h, w = self.input_height, self.input_width
        for _ in range(NUM_POOLS):
            h, w = h // 2, w // 2
        return h, w

    def flat_features(self) -> int:
        h, w = self.feature_map_size()
        return self.channels_per_block[3] * h * w

    def check_feasible(self) -> None:
        """Reject inputs too small to stay above one pixel after the last pool."""
        h, w = self.feature_map_size()
        if h < 2 or w < 2:
            raise ConfigurationError(
                f"input {self.input_height}x{self.input_width} shrinks to {h}x{w} after "
                f"{NUM_POOLS} pools; both sides must stay >= 2"
            )
