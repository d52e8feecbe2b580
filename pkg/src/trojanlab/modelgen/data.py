"""Data manager: experiment CSVs in, training-ready arrays out.

Images come from the corpus PNGs named by each record; labels are the
train labels (which is where poisoning bites) with true labels kept
alongside for evaluation.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Tuple, Union

import numpy as np

from ..datagen.corpus import load_image
from ..experiment import ExperimentRecord, load_experiment


class DataError(Exception):
    pass


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray  # (N, C, H, W) float32 in [0, 1]
    train_labels: np.ndarray  # (N,) int64
    true_labels: np.ndarray  # (N,) int64
    triggered: np.ndarray  # (N,) bool
    files: Tuple[str, ...]

    def __len__(self) -> int:
        return self.images.shape[0]


class DataManager:
    def __init__(self, corpus_root: Union[str, os.PathLike]):
        self.corpus_root = Path(corpus_root)

    def load_records(self, records: Sequence[ExperimentRecord]) -> Dataset:
        if not records:
            raise DataError("no records to load")
        images = []
        for rec in records:
            path = self.corpus_root / rec.file
            if not path.exists():
                raise DataError(f"missing corpus file: {path}")
            arr = load_image(path)
            if arr.ndim == 2:
                arr = arr[None, :, :]
            else:
                # channels-last PNG to channels-first
                arr = np.transpose(arr, (2, 0, 1))
            images.append(arr)
        stacked = np.stack(images).astype(np.float32)
        return Dataset(
            images=stacked,
            train_labels=np.array([r.train_label for r in records], dtype=np.int64),
            true_labels=np.array([r.true_label for r in records], dtype=np.int64),
            triggered=np.array([r.triggered for r in records], dtype=bool),
            files=tuple(r.file for r in records),
        )

    def load(self, csv_path: Union[str, os.PathLike]) -> Dataset:
        """Load one experiment CSV, refusing invalid definitions."""
        records, report = load_experiment(csv_path, corpus_root=self.corpus_root)
        if not report.ok:
            head = "; ".join(report.violations[:3])
            raise DataError(f"invalid experiment {csv_path}: {head}")
        return self.load_records(records)

    def load_clean(self, split: str = "test") -> Dataset:
        """Load a clean corpus manifest (header file,label) as a Dataset."""
        if split not in ("train", "test"):
            raise DataError(f"split must be train or test, got {split!r}")
        manifest = self.corpus_root / f"clean_{split}.csv"
        if not manifest.exists():
            raise DataError(f"no such manifest: {manifest}")
        with open(manifest, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != ["file", "label"]:
                raise DataError(f"{manifest}: bad manifest header {header!r}")
            records = [
                ExperimentRecord(
                    file=row[0],
                    true_label=int(row[1]),
                    train_label=int(row[1]),
                    triggered=False,
                )
                for row in reader
            ]
        return self.load_records(records)


def split_validation(
    n: int, triggered: np.ndarray, fraction: float, seed: int
) -> Tuple[np.ndarray, np.ndarray]:
    """Index split for early stopping: validation is clean rows only.

    Takes round(fraction * clean count) untriggered rows, seeded; training
    keeps everything else including all poisoned rows, in original order.
    """
    if not 0.0 < fraction < 1.0:
        raise DataError(f"validation fraction must be in (0, 1), got {fraction}")
    clean = np.flatnonzero(~np.asarray(triggered))
    if clean.size < 2:
        raise DataError("need at least 2 untriggered rows to split validation")
    n_val = max(1, int(round(fraction * clean.size)))
    rng = np.random.default_rng(seed)
    val = np.sort(rng.choice(clean, size=n_val, replace=False))
    mask = np.ones(n, dtype=bool)
    mask[val] = False
    return np.flatnonzero(mask), val
