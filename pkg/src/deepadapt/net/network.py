"""The two-pathway network.

Layout (k = 3x3 kernels, c_i = channels of block i)::

    input [N,1,H,W]
      shared block 1: conv(1->c1) conv(c1->c1) pool
      main blocks 2-4 and aux blocks 2-4: conv(c_{i-1}->c_i) conv(c_i->c_i) pool
      after block i in the adaptive set: main input <- adapt(main_i, aux_i)
      per pathway: flatten -> fc1 -> dropout -> fc2 -> dropout -> head

Every conv and hidden FC layer is followed by leaky-ReLU; heads emit raw
logits.

Parameter count, with h = H//16, w = W//16, (f1, f2) the FC widths, n writers
and K the aux head width::

    conv(a, b)  = 9ab + b
    shared      = conv(1, c1) + conv(c1, c1)
    blocks      = sum_{i=2..4} conv(c_{i-1}, c_i) + conv(c_i, c_i)
    fc(out)     = (c4*h*w)*f1 + f1 + f1*f2 + f2 + f2*out + out
    adapters    = sum_{i in S} c_i              (linear)
                  sum_{i in S} 2*conv(c_i, c_i)  (deep)
    total       = shared + 2*blocks + fc(n) + fc(K) + adapters
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional

import numpy as np

from ..core import (
    RngStream,
    Tensor,
    constant,
    conv2d,
    dropout,
    flatten,
    fully_connected,
    leaky_relu,
    maxpool2,
    xavier_init,
    zeros,
)
from ..errors import CheckpointError, DimensionError
from .adapters import adapt, alpha_name, deep_names
from .config import AdaptiveMode, NetworkConfig

PATHWAYS = ("main", "aux")


def _conv_shapes(prefix: str, c_in: int, c_out: int) -> dict[str, tuple[int, ...]]:
    return {
        f"{prefix}.conv1.w": (c_out, c_in, 3, 3),
        f"{prefix}.conv1.b": (c_out,),
        f"{prefix}.conv2.w": (c_out, c_out, 3, 3),
        f"{prefix}.conv2.b": (c_out,),
    }


def parameter_shapes(config: NetworkConfig) -> dict[str, tuple[int, ...]]:
    """Name -> shape of every trainable tensor, in construction order."""
    c = config.channels_per_block
    f1, f2 = config.fc_widths
    shapes: dict[str, tuple[int, ...]] = {}
    shapes.update(_conv_shapes("shared", 1, c[0]))
    for pathway in PATHWAYS:
        for block in (2, 3, 4):
            shapes.update(_conv_shapes(f"{pathway}.block{block}", c[block - 2], c[block - 1]))
    for block in config.active_blocks:
        cb = config.block_channels(block)
        if config.adaptive_mode == AdaptiveMode.LINEAR:
            shapes[alpha_name(block)] = (cb,)
        else:
            w1, b1, w2, b2 = deep_names(block)
            shapes.update({w1: (cb, cb, 3, 3), b1: (cb,), w2: (cb, cb, 3, 3), b2: (cb,)})
    flat = config.flat_features()
    for pathway, width in (("main", config.writer_classes), ("aux", config.aux_head.width)):
        shapes[f"{pathway}.fc1.w"] = (flat, f1)
        shapes[f"{pathway}.fc1.b"] = (f1,)
        shapes[f"{pathway}.fc2.w"] = (f1, f2)
        shapes[f"{pathway}.fc2.b"] = (f2,)
        shapes[f"{pathway}.head.w"] = (f2, width)
        shapes[f"{pathway}.head.b"] = (width,)
    return shapes


def parameter_count(config: NetworkConfig) -> int:
    """Closed-form number of scalar parameters (see module docstring)."""

    def conv(a: int, b: int) -> int:
        return 9 * a * b + b

    c1, c2, c3, c4 = config.channels_per_block
    f1, f2 = config.fc_widths
    flat = config.flat_features()

    def fc(out: int) -> int:
        return flat * f1 + f1 + f1 * f2 + f2 + f2 * out + out

    shared = conv(1, c1) + conv(c1, c1)
    blocks = conv(c1, c2) + conv(c2, c2) + conv(c2, c3) + conv(c3, c3) + conv(c3, c4) + conv(c4, c4)
    if config.adaptive_mode == AdaptiveMode.LINEAR:
        adapters = sum(config.block_channels(i) for i in config.active_blocks)
    elif config.adaptive_mode == AdaptiveMode.DEEP:
        adapters = sum(2 * conv(config.block_channels(i), config.block_channels(i)) for i in config.active_blocks)
    else:
        adapters = 0
    return shared + 2 * blocks + fc(config.writer_classes) + fc(config.aux_head.width) + adapters


@dataclass
class PathwayState:
    """Block activations after pooling; index 0 is block 1 (shared)."""

    main: list[Tensor] = field(default_factory=list)
    aux: list[Tensor] = field(default_factory=list)


class Network:
    """Parameters plus the forward pass of the two-pathway network."""

    def __init__(self, config: NetworkConfig, params: dict[str, Tensor]) -> None:
        self.config = config
        self.params = params

    # -- parameter access ---------------------------------------------------

    def parameters(self) -> Iterator[tuple[str, Tensor]]:
        return iter(self.params.items())

    def num_parameters(self) -> int:
        return sum(p.size for p in self.params.values())

    def feature_map_size(self) -> tuple[int, int]:
        """Spatial size (h, w) after the four pools."""
        return self.config.feature_map_size()

    def pathway_parameters(self, group: str) -> list[str]:
        """Names in one of the groups ``shared``, ``main``, ``aux``, ``adapt``."""
        return [name for name in self.params if name.split(".", 1)[0] == group]

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data for name, p in self.params.items()}

    def load_arrays(self, arrays: Mapping[str, np.ndarray]) -> None:
        """Copy arrays into the parameters after checking names and shapes."""
        missing = [n for n in self.params if n not in arrays]
        if missing:
            raise CheckpointError(f"checkpoint lacks parameters: {missing[:5]}")
        for name, p in self.params.items():
            arr = np.asarray(arrays[name])
            if arr.shape != p.shape:
                raise CheckpointError(f"parameter {name!r}: checkpoint shape {arr.shape}, config expects {p.shape}")
            p.data = arr.astype(p.dtype, copy=True)

    # -- forward ------------------------------------------------------------

    def _block(self, x: Tensor, prefix: str) -> Tensor:
        cfg = self.config
        p = self.params
        h = leaky_relu(conv2d(x, p[f"{prefix}.conv1.w"], p[f"{prefix}.conv1.b"], cfg.conv_method), cfg.leaky_slope)
        h = leaky_relu(conv2d(h, p[f"{prefix}.conv2.w"], p[f"{prefix}.conv2.b"], cfg.conv_method), cfg.leaky_slope)
        return maxpool2(h)

    def _fc_stack(self, x: Tensor, pathway: str, training: bool, rng: Optional[RngStream]) -> Tensor:
        cfg = self.config
        p = self.params
        h = flatten(x)
        for layer in ("fc1", "fc2"):
            h = leaky_relu(fully_connected(h, p[f"{pathway}.{layer}.w"], p[f"{pathway}.{layer}.b"]), cfg.leaky_slope)
            site_rng = rng.split(f"dropout/{pathway}.{layer}") if (training and rng is not None) else None
            h = dropout(h, cfg.dropout_rate, training, site_rng)
        return fully_connected(h, p[f"{pathway}.head.w"], p[f"{pathway}.head.b"])

    def forward_with_state(
        self, batch: np.ndarray, training: bool = False, rng: Optional[RngStream] = None
    ) -> tuple[Tensor, Tensor, PathwayState]:
        cfg = self.config
        batch = np.asarray(batch)
        expected = (1, cfg.input_height, cfg.input_width)
        if batch.ndim != 4 or batch.shape[1:] != expected:
            raise DimensionError(f"batch must be [N,{expected[0]},{expected[1]},{expected[2]}], got {batch.shape}")
        x = Tensor(batch.astype(cfg.dtype, copy=False))

        shared = self._block(x, "shared")
        state = PathwayState(main=[shared], aux=[shared])
        main_in, aux_in = shared, shared
        active = set(cfg.active_blocks)
        for block in (2, 3, 4):
            main_act = self._block(main_in, f"main.block{block}")
            aux_act = self._block(aux_in, f"aux.block{block}")
            state.main.append(main_act)
            state.aux.append(aux_act)
            if block in active:
                main_in = adapt(
                    cfg.adaptive_mode,
                    block,
                    main_act,
                    aux_act,
                    self.params,
                    leaky_slope=cfg.leaky_slope,
                    conv_method=cfg.conv_method,
                )
            else:
                main_in = main_act
            aux_in = aux_act

        writer_logits = self._fc_stack(main_in, "main", training, rng)
        aux_logits = self._fc_stack(aux_in, "aux", training, rng)
        return writer_logits, aux_logits, state

    def forward(
        self, batch: np.ndarray, training: bool = False, rng: Optional[RngStream] = None
    ) -> tuple[Tensor, Tensor]:
        """Return raw (writer_logits [N,n], aux_logits [N,K]) for a [N,1,H,W] batch."""
        writer_logits, aux_logits, _ = self.forward_with_state(batch, training, rng)
        return writer_logits, aux_logits


def build_network(config: NetworkConfig, rng: RngStream) -> Network:
    """Create a Xavier-initialised network.

    Each tensor draws from ``rng.split(name)``, so initial values depend only
    on the seed and the parameter name. Biases start at 0 and linear mixing
    weights at 0.5.
    """
    config.check_feasible()
    dtype = config.dtype
    params: dict[str, Tensor] = {}
    for name, shape in parameter_shapes(config).items():
        if name.endswith(".alpha"):
            params[name] = constant(shape, 0.5, dtype=dtype, name=name)
        elif name.endswith(".b"):
            params[name] = zeros(shape, dtype=dtype, name=name)
        else:
            params[name] = xavier_init(shape, rng.split(name), dtype=dtype, name=name)
    return Network(config, params)
