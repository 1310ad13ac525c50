"""Binary tensor checkpoints.

Layout (little-endian)::

    magic      8 bytes   b"ADNETCK1"
    version    u32
    count      u32
    count x:
        name_len   u16, then UTF-8 name
        rank       u8
        dims       rank x u64
        values     prod(dims) x f64, row-major
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import Mapping

import numpy as np

from ..errors import CheckpointError, StorageError

MAGIC = b"ADNETCK1"
FORMAT_VERSION = 1


def encode_tensors(tensors: Mapping[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(tensors))]
    for name, arr in tensors.items():
        raw_name = name.encode("utf-8")
        if len(raw_name) > 0xFFFF:
            raise CheckpointError(f"tensor name too long: {name[:40]}...")
        arr = np.asarray(arr)
        if arr.ndim > 0xFF:
            raise CheckpointError(f"tensor {name!r} has rank {arr.ndim}")
        parts.append(struct.pack("<H", len(raw_name)))
        parts.append(raw_name)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(parts)


def decode_tensors(blob: bytes) -> dict[str, np.ndarray]:
    if blob[:8] != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    try:
        version, count = struct.unpack_from("<II", blob, 8)
        if version != FORMAT_VERSION:
            raise CheckpointError(f"unsupported checkpoint version {version}")
        offset = 16
        tensors: dict[str, np.ndarray] = {}
        for _ in range(count):
            (name_len,) = struct.unpack_from("<H", blob, offset)
            offset += 2
            name = blob[offset : offset + name_len].decode("utf-8")
            offset += name_len
            (rank,) = struct.unpack_from("<B", blob, offset)
            offset += 1
            dims = struct.unpack_from(f"<{rank}Q", blob, offset)
            offset += 8 * rank
            size = int(np.prod(dims, dtype=np.int64)) if rank else 1
            values = np.frombuffer(blob, dtype="<f8", count=size, offset=offset)
            offset += 8 * size
            tensors[name] = values.astype(np.float64).reshape(dims)
    except (struct.error, ValueError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"truncated or corrupt checkpoint: {exc}") from exc
    if offset != len(blob):
        raise CheckpointError(f"{len(blob) - offset} trailing bytes after last tensor")
    return tensors


def save_checkpoint(path: Path, tensors: Mapping[str, np.ndarray]) -> None:
    """Write *tensors* (in mapping order) to *path*."""
    blob = encode_tensors(tensors)
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_bytes(blob)
    except OSError as exc:
        raise StorageError(f"cannot write checkpoint {path}: {exc}") from exc


def load_checkpoint(path: Path) -> dict[str, np.ndarray]:
    """Read a checkpoint written by :func:`save_checkpoint`."""
    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise StorageError(f"cannot read checkpoint {path}: {exc}") from exc
    return decode_tensors(blob)
