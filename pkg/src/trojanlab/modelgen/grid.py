"""Experiment grid runner: cross-product of trigger settings, resumable.

A grid cell is (trigger, placement, xform, poison percentage, batch
size); each cell trains n models. The manifest CSV is the source of
truth for progress: rerunning skips every (cell, model) whose bundle
already loads, and per-model failures are recorded without stopping the
sweep.
"""

from __future__ import annotations

import csv
import itertools
import os
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Tuple, Union

from ..datagen.corpus import CorpusConfig
from ..datagen.trigger import Placement, Rotation, TriggerConfig, TriggerKind
from ..experiment import PoisonPolicy, build_experiment
from ..seeds import derive_seed
from .bundle import load_bundle, save_bundle
from .runner import (
    EarlyStopSpec,
    ModelgenError,
    OptimizerSpec,
    RunnerConfig,
    train_model,
)

MANIFEST_COLUMNS = (
    "cell_id",
    "trigger",
    "placement",
    "xform",
    "poison_pct",
    "batch_size",
    "model_index",
    "status",
    "bundle_path",
    "epochs_trained",
)

TRIGGERS = ("reverse_lambda", "random_rectangular")
PLACEMENTS = ("static", "dynamic")
XFORMS = ("none", "random_rotation")


@dataclass(frozen=True)
class GridSpec:
    triggers: Tuple[str, ...] = TRIGGERS
    placements: Tuple[str, ...] = PLACEMENTS
    xforms: Tuple[str, ...] = XFORMS
    poison_pcts: Tuple[int, ...] = (5, 10, 20, 30, 40, 50)
    batch_sizes: Tuple[int, ...] = (16, 32, 64)
    n_per_config: int = 15

    def __post_init__(self):
        if self.n_per_config < 1:
            raise ModelgenError(f"n_per_config must be >= 1, got {self.n_per_config}")
        bad = set(self.triggers) - set(TRIGGERS)
        bad |= set(self.placements) - set(PLACEMENTS)
        bad |= set(self.xforms) - set(XFORMS)
        if bad:
            raise ModelgenError(f"unsupported grid axis values: {sorted(bad)}")


@dataclass(frozen=True)
class GridCell:
    trigger: str
    placement: str
    xform: str
    poison_pct: int
    batch_size: int


def grid_cells(spec: GridSpec) -> List[GridCell]:
    return [
        GridCell(*combo)
        for combo in itertools.product(
            spec.triggers, spec.placements, spec.xforms,
            spec.poison_pcts, spec.batch_sizes,
        )
    ]


def cell_id(cell: GridCell) -> str:
    return (
        f"{cell.trigger}-{cell.placement}-{cell.xform}"
        f"-p{cell.poison_pct}-b{cell.batch_size}"
    )


def cell_trigger(
    cell: GridCell,
    master_seed: int,
    size: int = 5,
    static_xy: Tuple[int, int] = (21, 21),
) -> TriggerConfig:
    """The TriggerConfig a grid cell denotes.

    The trigger seed depends on (trigger, placement, xform) only, so cells
    that differ in poisoning or batch size share identical triggered
    pixels and the experiment stays a controlled comparison.
    """
    kind = TriggerKind(cell.trigger)
    placement = (
        Placement.static(*static_xy)
        if cell.placement == "static"
        else Placement.dynamic()
    )
    rotation = Rotation.none() if cell.xform == "none" else Rotation.random()
    seed = derive_seed(master_seed, f"trigger:{cell.trigger}-{cell.placement}-{cell.xform}")
    return TriggerConfig(
        kind, size=size, placement=placement, rotation=rotation, seed=seed
    )


def _atomic_write_manifest(path: Path, rows: List[dict]) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=MANIFEST_COLUMNS)
        writer.writeheader()
        writer.writerows(rows)
    os.replace(tmp, path)


def read_manifest(path: Union[str, os.PathLike]) -> List[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _train_task(args) -> Tuple[str, str]:
    """Worker body: train one model, save its bundle. Returns (status, epochs)."""
    cfg, model_index, bundle_path = args
    bundle = train_model(cfg, model_index)
    save_bundle(bundle, bundle_path)
    return "done", str(bundle.statistics.epochs_trained)


def run_grid(
    corpus: CorpusConfig,
    spec: GridSpec,
    out_dir: Union[str, os.PathLike],
    source_label: int = 4,
    target_label: int = 5,
    master_seed: int = 0,
    optimizer: Optional[OptimizerSpec] = None,
    early_stop: Optional[EarlyStopSpec] = None,
    workers: int = 1,
    dry_run: bool = False,
    trigger_size: int = 5,
    static_xy: Tuple[int, int] = (21, 21),
) -> str:
    """Run (or plan, with dry_run) the grid; returns the manifest path.

    Resumable: a (cell, model) whose bundle file loads is not retrained.
    The manifest is rewritten atomically after every model.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_path = out / "manifest.csv"
    opt = optimizer or OptimizerSpec()
    stop = early_stop or EarlyStopSpec()

    rows: List[dict] = []
    pending = []  # (row index, RunnerConfig, model_index, bundle path)
    for cell in grid_cells(spec):
        cid = cell_id(cell)
        # experiment CSVs depend on everything but batch size
        exp_key = f"{cell.trigger}-{cell.placement}-{cell.xform}-p{cell.poison_pct}"
        exp_dir = out / "experiments" / exp_key
        paths = None
        if not dry_run:
            trigger = cell_trigger(cell, master_seed, trigger_size, static_xy)
            policy = PoisonPolicy(
                source_label,
                target_label,
                cell.poison_pct / 100.0,
                seed=derive_seed(master_seed, f"poison:{exp_key}"),
            )
            paths = build_experiment(corpus, policy, trigger, exp_dir)
        for mi in range(spec.n_per_config):
            bundle_path = out / "bundles" / f"{cid}-m{mi}.zip"
            row = {
                "cell_id": cid,
                "trigger": cell.trigger,
                "placement": cell.placement,
                "xform": cell.xform,
                "poison_pct": str(cell.poison_pct),
                "batch_size": str(cell.batch_size),
                "model_index": str(mi),
                "status": "pending",
                "bundle_path": str(bundle_path),
                "epochs_trained": "",
            }
            rows.append(row)
            if dry_run:
                continue
            if bundle_path.exists():
                try:
                    done = load_bundle(bundle_path)
                    row["status"] = "done"
                    row["epochs_trained"] = str(done.statistics.epochs_trained)
                    continue
                except ModelgenError:
                    bundle_path.unlink()  # unreadable: retrain
            cfg = RunnerConfig(
                train_csv=paths.train,
                test_clean_csv=paths.test_clean,
                test_triggered_csv=paths.test_triggered,
                corpus_root=str(corpus.root),
                optimizer=replace(opt, batch_size=cell.batch_size),
                early_stop=stop,
                models_per_config=spec.n_per_config,
                base_seed=derive_seed(master_seed, f"train:{cid}"),
            )
            pending.append((len(rows) - 1, cfg, mi, bundle_path))

    (out / "bundles").mkdir(exist_ok=True)
    _atomic_write_manifest(manifest_path, rows)
    if dry_run or not pending:
        return str(manifest_path)

    def record(row_idx: int, status: str, epochs: str) -> None:
        rows[row_idx]["status"] = status
        rows[row_idx]["epochs_trained"] = epochs
        _atomic_write_manifest(manifest_path, rows)

    if workers <= 1:
        for row_idx, cfg, mi, bundle_path in pending:
            try:
                status, epochs = _train_task((cfg, mi, bundle_path))
            except Exception as exc:  # record and keep sweeping
                status, epochs = f"failed: {exc}", ""
                traceback.print_exc()
            record(row_idx, status, epochs)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {
                pool.submit(_train_task, (cfg, mi, bundle_path)): row_idx
                for row_idx, cfg, mi, bundle_path in pending
            }
            for future in as_completed(futures):
                row_idx = futures[future]
                try:
                    status, epochs = future.result()
                except Exception as exc:
                    status, epochs = f"failed: {exc}", ""
                record(row_idx, status, epochs)
    return str(manifest_path)
