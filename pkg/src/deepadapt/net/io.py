"""Network checkpoints.

A checkpoint is a directory::

    header.json    NetworkConfig plus free-form metadata (training state, labels)
    params.adnet   ADNETCK1 tensors: parameters, then any extra tensors

Loading rebuilds the parameter layout from the header's config and refuses
tensors whose names or shapes disagree with it.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Mapping, Optional

import numpy as np
from pydantic import ValidationError

from ..core import RngStream, load_checkpoint, save_checkpoint
from ..errors import CheckpointError, StorageError
from .config import NetworkConfig
from .network import Network, build_network, parameter_shapes

HEADER_FILE = "header.json"
PARAMS_FILE = "params.adnet"
HEADER_FORMAT = "deepadapt-network"
HEADER_VERSION = 1


def save_network(
    path: Path,
    network: Network,
    meta: Optional[Mapping[str, Any]] = None,
    extra_tensors: Optional[Mapping[str, np.ndarray]] = None,
) -> Path:
    """Write *network* (and optional extra tensors such as optimizer moments) to directory *path*."""
    path = Path(path)
    header = {
        "format": HEADER_FORMAT,
        "version": HEADER_VERSION,
        "network": network.config.model_dump(mode="json"),
        "meta": dict(meta or {}),
    }
    tensors: dict[str, np.ndarray] = dict(network.state_arrays())
    for name, arr in (extra_tensors or {}).items():
        if name in tensors:
            raise CheckpointError(f"extra tensor {name!r} collides with a parameter name")
        tensors[name] = arr
    try:
        path.mkdir(parents=True, exist_ok=True)
        (path / HEADER_FILE).write_text(json.dumps(header, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    except OSError as exc:
        raise StorageError(f"cannot write checkpoint header in {path}: {exc}") from exc
    save_checkpoint(path / PARAMS_FILE, tensors)
    return path


def read_header(path: Path) -> dict[str, Any]:
    header_path = Path(path) / HEADER_FILE
    try:
        header = json.loads(header_path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise StorageError(f"cannot read checkpoint header {header_path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"checkpoint header {header_path} is not valid JSON: {exc}") from exc
    if header.get("format") != HEADER_FORMAT or header.get("version") != HEADER_VERSION:
        raise CheckpointError(f"{header_path} is not a version {HEADER_VERSION} network header")
    return header


def load_network(path: Path) -> tuple[Network, dict[str, Any], dict[str, np.ndarray]]:
    """Load a checkpoint directory.

    Returns:
        (network, meta, extra_tensors) where extra tensors are everything in
        the tensor file that is not a parameter.
    """
    header = read_header(path)
    try:
        config = NetworkConfig.model_validate(header["network"])
    except (KeyError, ValidationError) as exc:
        raise CheckpointError(f"checkpoint header holds an invalid network config: {exc}") from exc

    tensors = load_checkpoint(Path(path) / PARAMS_FILE)
    expected = parameter_shapes(config)
    for name, shape in expected.items():
        if name not in tensors:
            raise CheckpointError(f"checkpoint lacks parameter {name!r} required by its config")
        if tuple(tensors[name].shape) != shape:
            raise CheckpointError(
                f"parameter {name!r} has shape {tuple(tensors[name].shape)}, config expects {shape}"
            )

    # initial values are overwritten right away; seed is irrelevant
    network = build_network(config, RngStream(seed=0))
    network.load_arrays(tensors)
    extra = {name: arr for name, arr in tensors.items() if name not in expected}
    return network, dict(header.get("meta", {})), extra
