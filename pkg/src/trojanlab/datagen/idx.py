"""IDX image/label container parsing, bit-exact.

Images use big-endian magic 0x00000803 (u8 data, dims N x H x W); labels
use 0x00000801 (u8 data, dim N). Files ending in .gz are decompressed
transparently.
"""

from __future__ import annotations

import gzip
import os
import struct
from typing import Union

import numpy as np

from .entity import DatagenError

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


class IdxFormatError(DatagenError):
    pass


def _open(path: Union[str, os.PathLike], mode: str):
    if str(path).endswith(".gz"):
        return gzip.open(path, mode)
    return open(path, mode)


def _read_exact(fh, n: int, what: str, path) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise IdxFormatError(
            f"{path}: truncated while reading {what} (wanted {n} bytes, got {len(data)})"
        )
    return data


def read_idx_images(path: Union[str, os.PathLike]) -> np.ndarray:
    """Read an image file into a uint8 array of shape (N, H, W)."""
    with _open(path, "rb") as fh:
        (magic,) = struct.unpack(">i", _read_exact(fh, 4, "magic", path))
        if magic != IMAGES_MAGIC:
            raise IdxFormatError(
                f"{path}: image magic 0x{magic:08x}, expected 0x{IMAGES_MAGIC:08x}"
            )
        n, h, w = struct.unpack(">3i", _read_exact(fh, 12, "dimensions", path))
        if n < 0 or h <= 0 or w <= 0:
            raise IdxFormatError(f"{path}: bad dimensions ({n}, {h}, {w})")
        raw = _read_exact(fh, n * h * w, "pixel data", path)
        if fh.read(1):
            raise IdxFormatError(f"{path}: trailing bytes after pixel data")
    return np.frombuffer(raw, dtype=np.uint8).reshape(n, h, w)


def read_idx_labels(path: Union[str, os.PathLike]) -> np.ndarray:
    """Read a label file into a uint8 array of shape (N,)."""
    with _open(path, "rb") as fh:
        (magic,) = struct.unpack(">i", _read_exact(fh, 4, "magic", path))
        if magic != LABELS_MAGIC:
            raise IdxFormatError(
                f"{path}: label magic 0x{magic:08x}, expected 0x{LABELS_MAGIC:08x}"
            )
        (n,) = struct.unpack(">i", _read_exact(fh, 4, "count", path))
        if n < 0:
            raise IdxFormatError(f"{path}: bad count {n}")
        raw = _read_exact(fh, n, "label data", path)
        if fh.read(1):
            raise IdxFormatError(f"{path}: trailing bytes after label data")
    return np.frombuffer(raw, dtype=np.uint8)


def write_idx_images(path: Union[str, os.PathLike], images: np.ndarray) -> None:
    images = np.ascontiguousarray(images, dtype=np.uint8)
    if images.ndim != 3:
        raise IdxFormatError(f"images must be N x H x W, got shape {images.shape}")
    with _open(path, "wb") as fh:
        fh.write(struct.pack(">4i", IMAGES_MAGIC, *images.shape))
        fh.write(images.tobytes())


def write_idx_labels(path: Union[str, os.PathLike], labels: np.ndarray) -> None:
    labels = np.ascontiguousarray(labels, dtype=np.uint8)
    if labels.ndim != 1:
        raise IdxFormatError(f"labels must be 1-D, got shape {labels.shape}")
    with _open(path, "wb") as fh:
        fh.write(struct.pack(">2i", LABELS_MAGIC, labels.shape[0]))
        fh.write(labels.tobytes())
