"""Two-pathway network with adaptive transfer units."""

from __future__ import annotations

from .adapters import adapt
from .config import ADAPTABLE_BLOCKS, AdaptiveMode, NetworkConfig, Precision
from .io import load_network, read_header, save_network
from .network import Network, PathwayState, build_network, parameter_count, parameter_shapes

__all__ = [
    "ADAPTABLE_BLOCKS",
    "AdaptiveMode",
    "Network",
    "NetworkConfig",
    "PathwayState",
    "Precision",
    "adapt",
    "build_network",
    "load_network",
    "parameter_count",
    "parameter_shapes",
    "read_header",
    "save_network",
]
