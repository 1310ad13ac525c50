"""Grayscale image I/O and resizing.

Images live on disk as 8-bit binary PGM (P5). In memory they are float
arrays in [0, 1], dark ink on a light background.
"""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

from ..errors import StorageError


def read_gray(path: Path) -> np.ndarray:
    """Read any OpenCV-readable image as 8-bit grayscale."""
    img = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if img is None:
        raise StorageError(f"cannot read image {path}")
    return img


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(image, dtype=np.float64) * 255.0), 0, 255).astype(np.uint8)


def write_pgm(path: Path, image: np.ndarray) -> None:
    """Write a [H,W] (or [1,H,W]) image in [0,1] as binary PGM."""
    image = np.asarray(image)
    if image.ndim == 3:
        image = image[0]
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise StorageError(f"cannot create {path.parent}: {exc}") from exc
    if not cv2.imwrite(str(path), to_uint8(image), [cv2.IMWRITE_PXM_BINARY, 1]):
        raise StorageError(f"cannot write image {path}")


def resize_bilinear(image: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize with half-pixel centres; the aspect ratio is not preserved."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape == (height, width):
        return image.copy()
    return cv2.resize(image, (width, height), interpolation=cv2.INTER_LINEAR)


def load_and_resize(path: Path, target_h: int, target_w: int) -> np.ndarray:
    """Load an image, stretch it to ``target_h x target_w`` and scale to [0, 1].

    Returns:
        Array of shape [1, target_h, target_w].
    """
    raw = read_gray(path).astype(np.float64) / 255.0
    return resize_bilinear(raw, target_h, target_w)[None, :, :]
