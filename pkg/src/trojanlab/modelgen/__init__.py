"""Classifier training from experiment definitions, plus the grid runner."""

from .arch import ARCHITECTURES, ArchitectureError, architecture_info, build_architecture
from .data import DataError, DataManager, Dataset, split_validation
from .runner import (
    DivergenceError,
    EarlyStopSpec,
    ModelgenError,
    OptimizerSpec,
    RunnerConfig,
    TrainedModelBundle,
    TrainingStatistics,
    config_from_dict,
    config_to_dict,
    evaluate_arrays,
    forward_logits,
    train_model,
)
from .bundle import (
    BUNDLE_VERSION,
    BundleError,
    BundleVersionError,
    instantiate,
    load_bundle,
    save_bundle,
)
from .grid import (
    MANIFEST_COLUMNS,
    GridCell,
    GridSpec,
    cell_id,
    cell_trigger,
    grid_cells,
    read_manifest,
    run_grid,
)

__all__ = [
    "ARCHITECTURES",
    "ArchitectureError",
    "architecture_info",
    "build_architecture",
    "DataError",
    "DataManager",
    "Dataset",
    "split_validation",
    "DivergenceError",
    "EarlyStopSpec",
    "ModelgenError",
    "OptimizerSpec",
    "RunnerConfig",
    "TrainedModelBundle",
    "TrainingStatistics",
    "config_from_dict",
    "config_to_dict",
    "evaluate_arrays",
    "forward_logits",
    "train_model",
    "BUNDLE_VERSION",
    "BundleError",
    "BundleVersionError",
    "instantiate",
    "load_bundle",
    "save_bundle",
    "MANIFEST_COLUMNS",
    "GridCell",
    "GridSpec",
    "cell_id",
    "cell_trigger",
    "grid_cells",
    "read_manifest",
    "run_grid",
]
