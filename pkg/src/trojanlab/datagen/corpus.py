"""Corpus builder: IDX host data in, one PNG per sample plus manifests out.

Layout under a corpus root:

    idx/                          source IDX files (synthesized if absent)
    clean/train/00000.png ...     clean samples
    clean/test/00000.png ...
    clean_train.csv               manifest: file,label
    clean_test.csv
    triggered/<trigger id>/train/00004.png ...   triggered variants of
    triggered/<trigger id>/test/00004.png ...    every source-label sample
    triggered_<trigger id>_train.csv             manifest: file,label,source_index
    triggered_<trigger id>_test.csv

Triggered variants exist for all source-label samples; experiment
definitions select which of them train rows actually use.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image

from .entity import DatagenError, ImageEntity
from .idx import read_idx_images, read_idx_labels
from .merge import insert
from .synthetic import (
    TEST_IMAGES,
    TEST_LABELS,
    TRAIN_IMAGES,
    TRAIN_LABELS,
    write_synthetic_idx,
)
from .trigger import Placement, Rotation, TriggerConfig, TriggerKind, make_trigger
from .xform import colorize, instagram_filter, rotate


class CorpusError(DatagenError):
    pass


@dataclass(frozen=True)
class CorpusConfig:
    root: str
    n_train: int = 10000
    n_test: int = 2000
    seed: int = 0
    image_size: int = 28


def trigger_id(cfg: TriggerConfig) -> str:
    """Deterministic, filesystem-safe identifier for a trigger config."""
    kind = cfg.kind.value
    if cfg.placement.mode == "static":
        place = f"static{cfg.placement.x}x{cfg.placement.y}"
    else:
        place = "dynamic"
    rot = cfg.rotation.mode
    if rot == "fixed":
        rot = f"fixed{cfg.rotation.angle:g}"
    parts = [kind, f"s{cfg.size}", place, f"rot-{rot}", f"seed{cfg.seed}"]
    if cfg.filter_kind:
        parts.insert(1, cfg.filter_kind)
    return "-".join(parts)


def save_image(path: Union[str, os.PathLike], pixels: np.ndarray) -> None:
    """Write [0,1] float pixels as an 8-bit PNG (gray or RGB)."""
    arr = np.round(np.asarray(pixels, dtype=np.float64) * 255.0).astype(np.uint8)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    mode = "L" if arr.ndim == 2 else "RGB"
    Image.fromarray(arr, mode=mode).save(path, format="PNG")


def load_image(path: Union[str, os.PathLike]) -> np.ndarray:
    """Read a PNG back to float32 [0,1]; gray gives (H, W), RGB (H, W, 3)."""
    with Image.open(path) as img:
        arr = np.asarray(img, dtype=np.uint8)
    return (arr.astype(np.float32) / 255.0).astype(np.float32)


def _write_manifest(path: Path, header: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def generate_clean_corpus(cfg: CorpusConfig) -> dict:
    """Materialize the clean corpus; synthesizes IDX sources if missing.

    Returns a dict with the manifest paths and per-split label arrays.
    Rerunning over an existing corpus rewrites identical bytes.
    """
    root = Path(cfg.root)
    idx_dir = root / "idx"
    expected = {
        "train_images": idx_dir / TRAIN_IMAGES,
        "train_labels": idx_dir / TRAIN_LABELS,
        "test_images": idx_dir / TEST_IMAGES,
        "test_labels": idx_dir / TEST_LABELS,
    }
    if not all(p.exists() for p in expected.values()):
        write_synthetic_idx(idx_dir, cfg.n_train, cfg.n_test, cfg.seed, cfg.image_size)
    out = {"root": str(root)}
    for split, img_path, lbl_path in (
        ("train", expected["train_images"], expected["train_labels"]),
        ("test", expected["test_images"], expected["test_labels"]),
    ):
        images = read_idx_images(img_path)
        labels = read_idx_labels(lbl_path)
        if images.shape[0] != labels.shape[0]:
            raise CorpusError(
                f"{split}: {images.shape[0]} images but {labels.shape[0]} labels"
            )
        split_dir = root / "clean" / split
        split_dir.mkdir(parents=True, exist_ok=True)
        rows = []
        for i in range(images.shape[0]):
            rel = f"clean/{split}/{i:05d}.png"
            save_image(root / rel, images[i].astype(np.float32) / 255.0)
            rows.append([rel, int(labels[i])])
        manifest = root / f"clean_{split}.csv"
        _write_manifest(manifest, ["file", "label"], rows)
        out[f"{split}_manifest"] = str(manifest)
        out[f"{split}_labels"] = labels.copy()
    return out


def _stamp_trigger(
    host: ImageEntity,
    base: ImageEntity,
    cfg: TriggerConfig,
    rng: np.random.Generator,
) -> ImageEntity:
    """Rotate (if configured) and place one trigger onto one host image.

    Per-sample draw order: rotation angle (random rotation only), then
    placement row, then column (dynamic placement only). Static placement
    with rotation re-anchors the rotated canvas so its center stays where
    the unrotated trigger's center would be, clamped to containment.
    """
    fg = base
    if cfg.rotation.mode == "fixed":
        fg = rotate(fg, cfg.rotation.angle)
    elif cfg.rotation.mode == "random":
        fg = rotate(fg, float(rng.uniform(0.0, 360.0)))
    if cfg.placement.mode == "static":
        y, x = cfg.placement.y, cfg.placement.x
        if fg.height != base.height or fg.width != base.width:
            cy = y + (base.height - 1) / 2.0
            cx = x + (base.width - 1) / 2.0
            y = int(round(cy - (fg.height - 1) / 2.0))
            x = int(round(cx - (fg.width - 1) / 2.0))
            y = int(np.clip(y, 0, host.height - fg.height))
            x = int(np.clip(x, 0, host.width - fg.width))
        placement = Placement.static(x, y)
    else:
        placement = Placement.dynamic()
    return insert(host, fg, placement, rng)


def apply_trigger_to_image(
    pixels: np.ndarray,
    cfg: TriggerConfig,
    rng: np.random.Generator,
    base: Optional[ImageEntity] = None,
) -> np.ndarray:
    """Produce the triggered variant of one [0,1] image array."""
    if cfg.kind == TriggerKind.INSTAGRAM_FILTER:
        if pixels.ndim == 2:
            entity = colorize(ImageEntity.from_gray(pixels))
        else:
            entity = ImageEntity(pixels, np.ones(pixels.shape[:2], dtype=bool))
        return instagram_filter(entity, cfg.filter_kind).pixels
    host = (
        ImageEntity.from_gray(pixels)
        if pixels.ndim == 2
        else ImageEntity(pixels, np.ones(pixels.shape[:2], dtype=bool))
    )
    if base is None:
        base = make_trigger(cfg)
    out = _stamp_trigger(host, base, cfg, rng)
    return out.pixels[:, :, 0] if pixels.ndim == 2 else out.pixels


def generate_triggered_corpus(
    cfg: CorpusConfig, trigger: TriggerConfig, source_label: int
) -> dict:
    """Write triggered variants of every source-label sample in each split.

    Each sample's RNG is seeded by (trigger seed, split code, sample
    index), so outputs are independent of generation order and rerunning
    rewrites identical bytes.
    """
    root = Path(cfg.root)
    tid = trigger_id(trigger)
    base = (
        make_trigger(trigger)
        if trigger.kind != TriggerKind.INSTAGRAM_FILTER
        else None
    )
    out = {"trigger_id": tid}
    for split_code, split in ((0, "train"), (1, "test")):
        manifest = root / f"clean_{split}.csv"
        if not manifest.exists():
            raise CorpusError(f"missing clean manifest {manifest}; generate the clean corpus first")
        rows = []
        out_dir = root / "triggered" / tid / split
        out_dir.mkdir(parents=True, exist_ok=True)
        with open(manifest, newline="") as fh:
            for row in csv.DictReader(fh):
                if int(row["label"]) != source_label:
                    continue
                src = root / row["file"]
                idx = int(Path(row["file"]).stem)
                rng = np.random.default_rng([trigger.seed, split_code, idx])
                pixels = load_image(src)
                triggered = apply_trigger_to_image(pixels, trigger, rng, base)
                rel = f"triggered/{tid}/{split}/{idx:05d}.png"
                save_image(root / rel, triggered)
                rows.append([rel, source_label, idx])
        _write_manifest(
            root / f"triggered_{tid}_{split}.csv",
            ["file", "label", "source_index"],
            rows,
        )
        out[f"{split}_manifest"] = str(root / f"triggered_{tid}_{split}.csv")
        out[f"{split}_count"] = len(rows)
    return out
