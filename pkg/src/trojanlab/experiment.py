"""Experiment definitions: which samples get poisoned, and the three CSVs.

An experiment is three CSV files over one corpus: a training listing in
which a seeded subset of source-label rows is replaced by triggered
variants relabeled to the target class, a clean test listing, and a
triggered test listing covering every source-label test sample.

Dialect is fixed: comma-separated, header exactly
``file,true_label,train_label,triggered``, booleans spelled True/False.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .datagen.corpus import CorpusConfig, generate_triggered_corpus, trigger_id
from .datagen.trigger import TriggerConfig


class ExperimentError(Exception):
    pass


HEADER = ("file", "true_label", "train_label", "triggered")


@dataclass(frozen=True)
class ExperimentRecord:
    """One row of an experiment CSV.

    An untriggered row must keep its true label; triggered rows may not.
    """

    file: str
    true_label: int
    train_label: int
    triggered: bool


@dataclass(frozen=True)
class PoisonPolicy:
    source_label: int
    target_label: int
    fraction: float
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.fraction <= 1.0:
            raise ExperimentError(f"fraction must be in [0, 1], got {self.fraction}")
        if self.source_label == self.target_label:
            raise ExperimentError(
                f"source and target labels must differ, both are {self.source_label}"
            )


@dataclass(frozen=True)
class ExperimentPaths:
    train: str
    test_clean: str
    test_triggered: str


def select_poison_indices(labels: Sequence[int], policy: PoisonPolicy) -> set:
    """Pick which source-label samples to poison.

    Returns round-half-up(fraction * source count) indices drawn uniformly
    without replacement, fully determined by policy.seed.
    """
    arr = np.asarray(labels)
    if arr.size == 0:
        raise ExperimentError("labels must be non-empty")
    source = np.flatnonzero(arr == policy.source_label)
    count = int(math.floor(policy.fraction * source.size + 0.5))
    if count == 0:
        return set()
    rng = np.random.default_rng(policy.seed)
    chosen = rng.choice(source, size=count, replace=False)
    return {int(i) for i in chosen}


def _read_manifest(path: Path) -> List[dict]:
    if not path.exists():
        raise ExperimentError(f"missing corpus files: {path}")
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def write_experiment(records: Sequence[ExperimentRecord], path: Union[str, os.PathLike]) -> None:
    """Emit records in the fixed CSV dialect."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HEADER)
        for rec in records:
            writer.writerow(
                [rec.file, rec.true_label, rec.train_label, str(rec.triggered)]
            )


def build_experiment(
    corpus: CorpusConfig,
    policy: PoisonPolicy,
    trigger: TriggerConfig,
    out_dir: Union[str, os.PathLike],
) -> ExperimentPaths:
    """Materialize the three experiment CSVs for one (policy, trigger) cell.

    Requires the clean corpus; triggered variants are derived data and are
    (re)generated here, which is cheap and byte-stable. Poisoned training
    rows replace their clean originals so class counts stay put.
    """
    root = Path(corpus.root)
    missing = [
        str(p)
        for p in (root / "clean_train.csv", root / "clean_test.csv")
        if not p.exists()
    ]
    if missing:
        raise ExperimentError("missing corpus files: " + ", ".join(missing))

    generate_triggered_corpus(corpus, trigger, policy.source_label)
    tid = trigger_id(trigger)

    # source index -> triggered file, per split
    triggered_files: Dict[str, Dict[int, str]] = {}
    for split in ("train", "test"):
        rows = _read_manifest(root / f"triggered_{tid}_{split}.csv")
        triggered_files[split] = {int(r["source_index"]): r["file"] for r in rows}

    clean_train = _read_manifest(root / "clean_train.csv")
    clean_test = _read_manifest(root / "clean_test.csv")

    labels = [int(r["label"]) for r in clean_train]
    poison = select_poison_indices(labels, policy)

    train_records = []
    for i, row in enumerate(clean_train):
        label = int(row["label"])
        if i in poison:
            train_records.append(
                ExperimentRecord(
                    triggered_files["train"][i], label, policy.target_label, True
                )
            )
        else:
            train_records.append(ExperimentRecord(row["file"], label, label, False))

    clean_records = [
        ExperimentRecord(r["file"], int(r["label"]), int(r["label"]), False)
        for r in clean_test
    ]
    triggered_records = [
        ExperimentRecord(
            triggered_files["test"][i],
            policy.source_label,
            policy.target_label,
            True,
        )
        for i, r in enumerate(clean_test)
        if int(r["label"]) == policy.source_label
    ]

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = ExperimentPaths(
        train=str(out / "train.csv"),
        test_clean=str(out / "test_clean.csv"),
        test_triggered=str(out / "test_triggered.csv"),
    )
    write_experiment(train_records, paths.train)
    write_experiment(clean_records, paths.test_clean)
    write_experiment(triggered_records, paths.test_triggered)
    return paths


@dataclass(frozen=True)
class ValidationReport:
    """Invariant violations found while loading, one message per row."""

    violations: Tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def load_experiment(
    path: Union[str, os.PathLike],
    corpus_root: Optional[Union[str, os.PathLike]] = None,
) -> Tuple[List[ExperimentRecord], ValidationReport]:
    """Parse one experiment CSV.

    Malformed rows (bad column count, non-integer labels, booleans other
    than True/False) raise with the 1-based line number. Semantic
    violations of the record invariants are collected into the report;
    file existence is checked only when corpus_root is given.
    """
    path = Path(path)
    if not path.exists():
        raise ExperimentError(f"no such experiment file: {path}")
    records = []
    violations = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ExperimentError(f"{path}:1: empty file, expected header")
        if tuple(header) != HEADER:
            raise ExperimentError(
                f"{path}:1: bad header {header!r}, expected {','.join(HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise ExperimentError(
                    f"{path}:{lineno}: expected 4 fields, got {len(row)}"
                )
            file, true_s, train_s, trig_s = row
            try:
                true_label = int(true_s)
                train_label = int(train_s)
            except ValueError:
                raise ExperimentError(
                    f"{path}:{lineno}: labels must be integers, got "
                    f"{true_s!r}, {train_s!r}"
                )
            if trig_s == "True":
                triggered = True
            elif trig_s == "False":
                triggered = False
            else:
                raise ExperimentError(
                    f"{path}:{lineno}: triggered must be True or False, got {trig_s!r}"
                )
            if not triggered and train_label != true_label:
                violations.append(
                    f"{path}:{lineno}: untriggered row relabels "
                    f"{true_label} -> {train_label}"
                )
            if corpus_root is not None and not (Path(corpus_root) / file).exists():
                violations.append(f"{path}:{lineno}: file not in corpus: {file}")
            records.append(ExperimentRecord(file, true_label, train_label, triggered))
    return records, ValidationReport(tuple(violations))
