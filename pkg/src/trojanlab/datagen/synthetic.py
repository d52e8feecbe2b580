"""Synthetic digit corpus.

Renders 5x7 font glyphs with per-sample scale, rotation, placement and
noise jitter, then writes genuine IDX files. Serves as a self-contained,
deterministic stand-in for a handwritten-digit download; every consumer
still goes through the bit-exact IDX parser.
"""

from __future__ import annotations

import os
from typing import Union

import numpy as np

from .entity import DatagenError, ImageEntity
from .idx import write_idx_images, write_idx_labels
from .merge import insert
from .trigger import Placement
from .xform import resize, rotate

_GLYPHS = {
    0: ("01110", "10001", "10011", "10101", "11001", "10001", "01110"),
    1: ("00100", "01100", "00100", "00100", "00100", "00100", "01110"),
    2: ("01110", "10001", "00001", "00010", "00100", "01000", "11111"),
    3: ("11111", "00010", "00100", "00010", "00001", "10001", "01110"),
    4: ("00010", "00110", "01010", "10010", "11111", "00010", "00010"),
    5: ("11111", "10000", "11110", "00001", "00001", "10001", "01110"),
    6: ("00110", "01000", "10000", "11110", "10001", "10001", "01110"),
    7: ("11111", "00001", "00010", "00100", "01000", "01000", "01000"),
    8: ("01110", "10001", "10001", "01110", "10001", "10001", "01110"),
    9: ("01110", "10001", "10001", "01111", "00001", "00010", "01100"),
}


def digit_glyph(label: int) -> np.ndarray:
    """The 7x5 binary glyph for a digit, as float32 0/1."""
    if label not in _GLYPHS:
        raise DatagenError(f"no glyph for label {label}")
    rows = _GLYPHS[label]
    return np.array([[float(c) for c in row] for row in rows], dtype=np.float32)


def render_digit(label: int, rng: np.random.Generator, size: int = 28) -> np.ndarray:
    """One jittered digit image, shape (size, size) float32 in [0,1].

    Draw order (fixed for determinism): target height, rotation angle,
    stroke intensity, placement row, placement column, pixel noise.
    """
    glyph = ImageEntity.from_gray(digit_glyph(label))
    target_h = int(rng.integers(12, 23))
    target_w = max(3, int(round(target_h * 5.0 / 7.0)))
    scaled = resize(glyph, target_w, target_h)
    angle = float(rng.uniform(-20.0, 20.0))
    rotated = rotate(scaled, angle)
    intensity = float(rng.uniform(0.55, 1.0))
    pixels = np.clip(rotated.pixels * intensity, 0.0, 1.0)
    rotated = ImageEntity(pixels, rotated.mask)
    canvas = ImageEntity.from_gray(np.zeros((size, size), dtype=np.float32))
    max_y = size - rotated.height
    max_x = size - rotated.width
    if max_y < 0 or max_x < 0:
        raise DatagenError(f"rendered digit {rotated.height}x{rotated.width} exceeds canvas {size}")
    center_y = max_y // 2
    center_x = max_x // 2
    y = int(np.clip(center_y + rng.integers(-3, 4), 0, max_y))
    x = int(np.clip(center_x + rng.integers(-3, 4), 0, max_x))
    placed = insert(canvas, rotated, Placement.static(x, y))
    noise = rng.normal(0.0, 0.12, size=(size, size)).astype(np.float32)
    return np.clip(placed.pixels[:, :, 0] + noise, 0.0, 1.0)


TRAIN_IMAGES = "train-images-idx3-ubyte"
TRAIN_LABELS = "train-labels-idx1-ubyte"
TEST_IMAGES = "t10k-images-idx3-ubyte"
TEST_LABELS = "t10k-labels-idx1-ubyte"


def write_synthetic_idx(
    idx_dir: Union[str, os.PathLike],
    n_train: int,
    n_test: int,
    seed: int,
    size: int = 28,
) -> dict:
    """Write a balanced synthetic corpus as four IDX files.

    Labels cycle 0..9 so class counts are exact; each sample's RNG is
    seeded by (corpus seed, split code, index), so any subset regenerates
    identically regardless of order.
    """
    os.makedirs(idx_dir, exist_ok=True)
    paths = {
        "train_images": os.path.join(idx_dir, TRAIN_IMAGES),
        "train_labels": os.path.join(idx_dir, TRAIN_LABELS),
        "test_images": os.path.join(idx_dir, TEST_IMAGES),
        "test_labels": os.path.join(idx_dir, TEST_LABELS),
    }
    for split_code, n, img_key, lbl_key in (
        (0, n_train, "train_images", "train_labels"),
        (1, n_test, "test_images", "test_labels"),
    ):
        labels = (np.arange(n) % 10).astype(np.uint8)
        images = np.zeros((n, size, size), dtype=np.uint8)
        for i in range(n):
            rng = np.random.default_rng([seed, split_code, i])
            images[i] = np.round(render_digit(int(labels[i]), rng, size) * 255.0)
        write_idx_images(paths[img_key], images)
        write_idx_labels(paths[lbl_key], labels)
    return paths
