"""Aggregate reporting over grid results.

Three summaries come out of a finished (or partial) sweep: epochs to
convergence by batch size, the yield-and-detection grid with x/y cells,
and triggered accuracy of passing models grouped by trigger placement.
Each is written as CSV next to a single plain-text rendering.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .metrics import TrojanMetrics, SubsetAccuracy, yield_filter
from .modelgen.grid import read_manifest

NO_MODELS_MARKER = "no models"

METRICS_COLUMNS = (
    "cell_id",
    "trigger",
    "placement",
    "xform",
    "poison_pct",
    "batch_size",
    "model_index",
    "clean_acc",
    "triggered_acc",
    "clean_triggered_label_acc",
)

DETECTION_COLUMNS = ("cell_id", "model_index", "verdict")

VERDICTS = ("anomalous", "clean")


class ReportError(Exception):
    pass


# ------------------------------------------------------------- row I/O


def write_metrics_rows(path: Union[str, os.PathLike], rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRICS_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in METRICS_COLUMNS})


def read_metrics_rows(path: Union[str, os.PathLike]) -> List[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != METRICS_COLUMNS:
            raise ReportError(f"bad metrics header in {path}: {reader.fieldnames}")
        return list(reader)


def write_detection_rows(path: Union[str, os.PathLike], rows: Sequence[dict]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=DETECTION_COLUMNS)
        writer.writeheader()
        for row in rows:
            if row["verdict"] not in VERDICTS:
                raise ReportError(f"unknown verdict {row['verdict']!r}")
            writer.writerow({k: row[k] for k in DETECTION_COLUMNS})


def read_detection_rows(path: Union[str, os.PathLike]) -> List[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or tuple(reader.fieldnames) != DETECTION_COLUMNS:
            raise ReportError(f"bad detection header in {path}: {reader.fieldnames}")
        return list(reader)


def _row_metrics(row: dict) -> TrojanMetrics:
    # counts are not in the CSV; scale to a fixed denominator for the
    # threshold comparison (the filter only looks at the ratio)
    def acc(field: str) -> SubsetAccuracy:
        value = float(row[field])
        if not 0.0 <= value <= 1.0:
            raise ReportError(f"{field} out of range in metrics row: {value}")
        return SubsetAccuracy(correct=round(value * 10**6), total=10**6)

    return TrojanMetrics(
        clean_acc=acc("clean_acc"),
        triggered_acc=acc("triggered_acc"),
        clean_triggered_label_acc=acc("clean_triggered_label_acc"),
    )


# -------------------------------------------------------- aggregations


@dataclass(frozen=True)
class EpochsRow:
    batch_size: int
    n_models: int
    mean_epochs: float
    std_epochs: float


@dataclass(frozen=True)
class GridRow:
    trigger: str
    placement: str
    xform: str
    batch_size: int
    poison_pct: int
    evaluated: int
    passed: int
    detected: Optional[int]  # None when no detection results were supplied

    @property
    def cell(self) -> str:
        top = "-" if self.detected is None else str(self.detected)
        return f"{top}/{self.passed}"


@dataclass(frozen=True)
class PlacementRow:
    placement: str
    n_passed: int
    mean_triggered_acc: float
    std_triggered_acc: float


def epochs_by_batch(manifest_rows: Sequence[dict]) -> List[EpochsRow]:
    """Mean and sample std of epochs_trained per batch size (done rows)."""
    groups: Dict[int, List[int]] = {}
    for row in manifest_rows:
        if row.get("status") != "done" or not row.get("epochs_trained"):
            continue
        groups.setdefault(int(row["batch_size"]), []).append(
            int(row["epochs_trained"])
        )
    out = []
    for batch_size in sorted(groups):
        epochs = groups[batch_size]
        std = float(np.std(epochs, ddof=1)) if len(epochs) > 1 else 0.0
        out.append(
            EpochsRow(batch_size, len(epochs), float(np.mean(epochs)), std)
        )
    return out


def _detection_index(detection_rows: Optional[Sequence[dict]]):
    if detection_rows is None:
        return None
    index = {}
    for row in detection_rows:
        index[(row["cell_id"], int(row["model_index"]))] = row["verdict"]
    return index


def yield_detection_grid(
    metrics_rows: Sequence[dict],
    detection_rows: Optional[Sequence[dict]] = None,
    threshold: float = 0.95,
) -> List[GridRow]:
    """One row per grid cell: models evaluated, passed, and (of the
    passing ones) detected as anomalous."""
    detections = _detection_index(detection_rows)
    cells: Dict[Tuple[str, str, str, int, int], List[dict]] = {}
    for row in metrics_rows:
        key = (
            row["trigger"],
            row["placement"],
            row["xform"],
            int(row["batch_size"]),
            int(row["poison_pct"]),
        )
        cells.setdefault(key, []).append(row)

    out = []
    for key in sorted(cells):
        rows = cells[key]
        passes, n_passed = yield_filter([_row_metrics(r) for r in rows], threshold)
        detected: Optional[int] = None
        if detections is not None:
            detected = sum(
                1
                for r, ok in zip(rows, passes)
                if ok
                and detections.get((r["cell_id"], int(r["model_index"]))) == "anomalous"
            )
        trigger, placement, xform, batch_size, poison_pct = key
        out.append(
            GridRow(
                trigger, placement, xform, batch_size, poison_pct,
                evaluated=len(rows), passed=n_passed, detected=detected,
            )
        )
    return out


def placement_summary(
    metrics_rows: Sequence[dict], threshold: float = 0.95
) -> List[PlacementRow]:
    """Triggered accuracy of passing models, pooled per placement."""
    groups: Dict[str, List[float]] = {}
    for row in metrics_rows:
        passes, _ = yield_filter([_row_metrics(row)], threshold)
        if passes[0]:
            groups.setdefault(row["placement"], []).append(
                float(row["triggered_acc"])
            )
    out = []
    for placement in sorted(groups):
        accs = groups[placement]
        std = float(np.std(accs, ddof=1)) if len(accs) > 1 else 0.0
        out.append(PlacementRow(placement, len(accs), float(np.mean(accs)), std))
    return out


# ---------------------------------------------------------- rendering


def _text_epochs(rows: List[EpochsRow]) -> List[str]:
    lines = ["Epochs to convergence by batch size", "batch    n    epochs (mean +/- std)"]
    if not rows:
        lines.append(f"  {NO_MODELS_MARKER}")
    for row in rows:
        lines.append(
            f"{row.batch_size:>5}  {row.n_models:>3}    "
            f"{row.mean_epochs:.1f} +/- {row.std_epochs:.1f}"
        )
    return lines


def _text_grid(rows: List[GridRow]) -> List[str]:
    lines = ["Yield and detection grid (detected/passed per cell)"]
    if not rows:
        lines.append(f"  {NO_MODELS_MARKER}")
        return lines
    pcts = sorted({r.poison_pct for r in rows})
    header = f"{'configuration':<38}" + "".join(f"{p:>8}%" for p in pcts)
    lines.append(header)
    by_config: Dict[Tuple[str, str, str, int], Dict[int, GridRow]] = {}
    for row in rows:
        config = (row.trigger, row.placement, row.xform, row.batch_size)
        by_config.setdefault(config, {})[row.poison_pct] = row
    for config in sorted(by_config):
        trigger, placement, xform, batch_size = config
        label = f"{trigger} {placement} {xform} b{batch_size}"
        cells = by_config[config]
        line = f"{label:<38}"
        for pct in pcts:
            cell = cells.get(pct)
            line += f"{cell.cell if cell else '':>9}"
        lines.append(line)
    return lines


def _text_placement(rows: List[PlacementRow]) -> List[str]:
    lines = [
        "Triggered accuracy of passing models by placement",
        "placement    n    accuracy (mean +/- std)",
    ]
    if not rows:
        lines.append(f"  {NO_MODELS_MARKER}")
    for row in rows:
        lines.append(
            f"{row.placement:<9}  {row.n_passed:>3}    "
            f"{row.mean_triggered_acc:.4f} +/- {row.std_triggered_acc:.4f}"
        )
    return lines


def render_report(
    epochs: List[EpochsRow],
    grid: List[GridRow],
    placement: List[PlacementRow],
) -> str:
    blocks = [_text_epochs(epochs), _text_grid(grid), _text_placement(placement)]
    return "\n\n".join("\n".join(block) for block in blocks) + "\n"


# -------------------------------------------------------- entry point


@dataclass(frozen=True)
class ReportPaths:
    epochs_csv: str
    grid_csv: str
    placement_csv: str
    text: str


def generate_report(
    manifest_csv: Union[str, os.PathLike],
    out_dir: Union[str, os.PathLike],
    metrics_csv: Optional[Union[str, os.PathLike]] = None,
    detection_csv: Optional[Union[str, os.PathLike]] = None,
    threshold: float = 0.95,
) -> ReportPaths:
    """Build all three summaries from result CSVs and write them out.

    metrics_csv and detection_csv are optional: without metrics the grid
    and placement tables are empty; without detections the grid cells
    show "-" for the detected count.
    """
    manifest_rows = read_manifest(manifest_csv)
    metrics_rows = read_metrics_rows(metrics_csv) if metrics_csv else []
    detection_rows = (
        read_detection_rows(detection_csv) if detection_csv else None
    )

    epochs = epochs_by_batch(manifest_rows)
    grid = yield_detection_grid(metrics_rows, detection_rows, threshold)
    placement = placement_summary(metrics_rows, threshold)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    epochs_csv = out / "epochs_by_batch.csv"
    with open(epochs_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["batch_size", "n_models", "mean_epochs", "std_epochs"])
        for row in epochs:
            writer.writerow(
                [row.batch_size, row.n_models,
                 f"{row.mean_epochs:.4f}", f"{row.std_epochs:.4f}"]
            )

    grid_csv = out / "yield_detection_grid.csv"
    with open(grid_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["trigger", "placement", "xform", "batch_size", "poison_pct",
             "evaluated", "passed", "detected", "cell"]
        )
        for row in grid:
            writer.writerow(
                [row.trigger, row.placement, row.xform, row.batch_size,
                 row.poison_pct, row.evaluated, row.passed,
                 "" if row.detected is None else row.detected, row.cell]
            )

    placement_csv = out / "triggered_accuracy_by_placement.csv"
    with open(placement_csv, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["placement", "n_passed", "mean_triggered_acc", "std_triggered_acc"]
        )
        for row in placement:
            writer.writerow(
                [row.placement, row.n_passed,
                 f"{row.mean_triggered_acc:.6f}", f"{row.std_triggered_acc:.6f}"]
            )

    text = out / "report.txt"
    text.write_text(render_report(epochs, grid, placement))
    return ReportPaths(str(epochs_csv), str(grid_csv), str(placement_csv), str(text))
