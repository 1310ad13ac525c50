"""End-to-end gradient checks of a tiny two-pathway network in every mode."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from ..core import RngStream, sigmoid_binary_cross_entropy, softmax_cross_entropy
from ..labels import AuxHeadSpec, AuxTask, LossKind, joint_loss
from ..net import ADAPTABLE_BLOCKS, AdaptiveMode, NetworkConfig, Precision, build_network
from .base import GradCheck

TINY_CHANNELS = (4, 4, 4, 4)
TINY_FC = (8, 8)
TINY_INPUT = (32, 32)
TINY_WRITERS = 3
TINY_VOCAB = 4
BATCH = 2
LOSS_WEIGHT = 0.7


def tiny_config(
    mode: AdaptiveMode,
    precision: Precision = Precision.DOUBLE,
    task: AuxTask = AuxTask.WORD,
    leaky_slope: float = 0.1,
    conv_method: Literal["direct", "gemm"] = "direct",
    adaptive_blocks: tuple[int, ...] = ADAPTABLE_BLOCKS,
) -> NetworkConfig:
    """Smallest network that stays 2x2 after the last pool, dropout off."""
    return NetworkConfig(
        input_height=TINY_INPUT[0],
        input_width=TINY_INPUT[1],
        channels_per_block=TINY_CHANNELS,
        fc_widths=TINY_FC,
        writer_classes=TINY_WRITERS,
        aux_head=AuxHeadSpec(task=task, vocab_size=TINY_VOCAB),
        adaptive_mode=mode,
        adaptive_block_indices=adaptive_blocks,
        leaky_slope=leaky_slope,
        dropout_rate=0.0,
        precision=precision,
        conv_method=conv_method,
    )


def _aux_targets(rng: RngStream, spec: AuxHeadSpec) -> np.ndarray:
    if spec.loss_kind == LossKind.SOFTMAX:
        return rng.integers(0, spec.width, BATCH)
    return (rng.random((BATCH, spec.width)) < 0.3).astype(np.uint8)


@dataclass(frozen=True)
class NetworkCheckOptions:
    """Run-config settings carried into the tiny networks."""

    leaky_slope: float = 0.1
    conv_method: Literal["direct", "gemm"] = "direct"
    adaptive_blocks: tuple[int, ...] = ADAPTABLE_BLOCKS


def _network_check(mode: AdaptiveMode, task: AuxTask, options: NetworkCheckOptions):
    def build(rng: RngStream, dtype: np.dtype):
        precision = Precision.DOUBLE if np.dtype(dtype) == np.float64 else Precision.SINGLE
        config = tiny_config(mode, precision, task, options.leaky_slope, options.conv_method, options.adaptive_blocks)
        network = build_network(config, rng.split("init"))
        if mode == AdaptiveMode.LINEAR:
            # move alpha off 0.5 so main and aux contributions differ
            for name in network.pathway_parameters("adapt"):
                p = network.params[name]
                p.data = rng.split(name).uniform(0.2, 0.8, p.shape).astype(dtype)
        images = rng.split("images").random((BATCH, 1, *TINY_INPUT)).astype(dtype)
        writer_y = rng.split("writers").integers(0, TINY_WRITERS, BATCH)
        aux_y = _aux_targets(rng.split("aux"), config.aux_head)
        aux_loss_fn = (
            softmax_cross_entropy if config.aux_head.loss_kind == LossKind.SOFTMAX else sigmoid_binary_cross_entropy
        )

        def loss():
            writer_logits, aux_logits = network.forward(images)
            return joint_loss(
                softmax_cross_entropy(writer_logits, writer_y), aux_loss_fn(aux_logits, aux_y), LOSS_WEIGHT
            )

        return dict(network.params), loss

    return build


def get_checks(options: Optional[NetworkCheckOptions] = None) -> list[GradCheck]:
    """Whole-network checks: every adaptive mode with a word head, plus letter and combined heads."""
    options = options or NetworkCheckOptions()
    checks = [
        GradCheck(f"network_{mode.value}", "network", _network_check(mode, AuxTask.WORD, options))
        for mode in AdaptiveMode
    ]
    checks.append(GradCheck("network_deep_chars", "network", _network_check(AdaptiveMode.DEEP, AuxTask.CHARS, options)))
    checks.append(
        GradCheck("network_linear_combined", "network", _network_check(AdaptiveMode.LINEAR, AuxTask.COMBINED, options))
    )
    return checks
