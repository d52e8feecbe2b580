"""Model training: config in, trained weight bundle out.

Each model is fully determined by (RunnerConfig, model_index): weight
init and minibatch shuffling share one RNG seeded by (base_seed,
model_index), and the validation split is seeded by base_seed alone so
every model of a config sees the same held-out clean rows.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ..engine import Adam, SGD, Sequential, Tensor, softmax_cross_entropy
from .arch import architecture_info
from .data import DataManager, Dataset, split_validation


class ModelgenError(Exception):
    pass


class DivergenceError(ModelgenError):
    """Training hit a non-finite loss; carries progress up to that point."""

    def __init__(self, message: str, epoch: int, statistics: "TrainingStatistics"):
        super().__init__(message)
        self.epoch = epoch
        self.statistics = statistics


@dataclass(frozen=True)
class OptimizerSpec:
    algorithm: str = "adam"
    learning_rate: float = 1e-3
    batch_size: int = 32

    def __post_init__(self):
        if self.algorithm not in ("adam", "sgd"):
            raise ModelgenError(f"unknown optimizer algorithm {self.algorithm!r}")
        if self.batch_size < 1:
            raise ModelgenError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass(frozen=True)
class EarlyStopSpec:
    patience: int = 5
    min_delta: float = 1e-4
    max_epochs: int = 40

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ModelgenError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience < 1:
            raise ModelgenError(f"patience must be >= 1, got {self.patience}")


@dataclass(frozen=True)
class RunnerConfig:
    train_csv: str
    test_clean_csv: str
    test_triggered_csv: str
    corpus_root: str
    architecture: str = "mnist-small"
    optimizer: OptimizerSpec = field(default_factory=OptimizerSpec)
    early_stop: EarlyStopSpec = field(default_factory=EarlyStopSpec)
    models_per_config: int = 1
    base_seed: int = 0
    val_fraction: float = 0.1

    def __post_init__(self):
        if self.models_per_config < 1:
            raise ModelgenError(
                f"models_per_config must be >= 1, got {self.models_per_config}"
            )


@dataclass(frozen=True)
class TrainingStatistics:
    train_loss: Tuple[float, ...]
    val_loss: Tuple[float, ...]
    val_accuracy: Tuple[float, ...]
    epochs_trained: int
    stop_reason: str  # "early" or "max_epochs"
    wall_time: float

    def __post_init__(self):
        series = (self.train_loss, self.val_loss, self.val_accuracy)
        if any(len(s) != self.epochs_trained for s in series):
            raise ModelgenError(
                f"epochs_trained {self.epochs_trained} does not match series lengths "
                f"{[len(s) for s in series]}"
            )
        if self.stop_reason not in ("early", "max_epochs"):
            raise ModelgenError(f"bad stop_reason {self.stop_reason!r}")


@dataclass(frozen=True)
class TrainedModelBundle:
    architecture: str
    weights: Tuple[Tuple[str, np.ndarray], ...]
    config: RunnerConfig
    statistics: TrainingStatistics
    model_index: int


def config_to_dict(cfg: RunnerConfig) -> dict:
    return asdict(cfg)


def config_from_dict(d: dict) -> RunnerConfig:
    d = dict(d)
    d["optimizer"] = OptimizerSpec(**d["optimizer"])
    d["early_stop"] = EarlyStopSpec(**d["early_stop"])
    return RunnerConfig(**d)


def stats_to_dict(stats: TrainingStatistics) -> dict:
    return asdict(stats)


def stats_from_dict(d: dict) -> TrainingStatistics:
    d = dict(d)
    for key in ("train_loss", "val_loss", "val_accuracy"):
        d[key] = tuple(d[key])
    return TrainingStatistics(**d)


def forward_logits(
    model: Sequential, images: np.ndarray, batch_size: int = 256
) -> np.ndarray:
    """Inference-only forward pass, batched to bound memory."""
    outs = []
    for start in range(0, images.shape[0], batch_size):
        x = Tensor(images[start : start + batch_size])
        outs.append(model(x).data)
    return np.concatenate(outs, axis=0)


def evaluate_arrays(
    model: Sequential, images: np.ndarray, labels: np.ndarray, batch_size: int = 256
) -> Tuple[float, float]:
    """(mean cross-entropy, accuracy) over one array split."""
    logits = forward_logits(model, images, batch_size)
    loss = float(
        softmax_cross_entropy(Tensor(logits), labels.astype(np.int64)).data
    )
    acc = float(np.mean(np.argmax(logits, axis=1) == labels))
    return loss, acc


def _make_optimizer(spec: OptimizerSpec, params: List[Tensor]):
    if spec.algorithm == "adam":
        return Adam(params, lr=spec.learning_rate)
    return SGD(params, lr=spec.learning_rate)


def train_model(
    cfg: RunnerConfig,
    model_index: int = 0,
    dataset: Optional[Dataset] = None,
) -> TrainedModelBundle:
    """Train one classifier and return its bundle.

    Stops early once clean-validation loss has gone `patience` epochs
    without a `min_delta` improvement, else at max_epochs. A preloaded
    dataset may be passed to amortize PNG decoding across models.
    """
    start_time = time.perf_counter()
    info = architecture_info(cfg.architecture)
    if dataset is None:
        dataset = DataManager(cfg.corpus_root).load(cfg.train_csv)
    if dataset.images.shape[1:] != info.input_shape:
        raise ModelgenError(
            f"data shape {dataset.images.shape[1:]} does not match "
            f"{cfg.architecture} input {info.input_shape}"
        )
    train_idx, val_idx = split_validation(
        len(dataset), dataset.triggered, cfg.val_fraction, cfg.base_seed
    )
    val_images = dataset.images[val_idx]
    val_labels = dataset.train_labels[val_idx]

    rng = np.random.default_rng([cfg.base_seed, model_index])
    model = info.builder(rng)
    params = [p for _, p in model.parameters()]
    opt = _make_optimizer(cfg.optimizer, params)

    train_losses: List[float] = []
    val_losses: List[float] = []
    val_accs: List[float] = []
    best = float("inf")
    stale = 0
    stop_reason = "max_epochs"

    def _stats(reason: str) -> TrainingStatistics:
        return TrainingStatistics(
            train_loss=tuple(train_losses),
            val_loss=tuple(val_losses),
            val_accuracy=tuple(val_accs),
            epochs_trained=len(train_losses),
            stop_reason=reason,
            wall_time=time.perf_counter() - start_time,
        )

    bs = cfg.optimizer.batch_size
    for epoch in range(cfg.early_stop.max_epochs):
        order = rng.permutation(train_idx)
        total = 0.0
        for start in range(0, order.size, bs):
            batch = order[start : start + bs]
            x = Tensor(dataset.images[batch])
            y = dataset.train_labels[batch]
            loss = softmax_cross_entropy(model(x), y)
            value = float(loss.data)
            if not np.isfinite(value):
                raise DivergenceError(
                    f"non-finite training loss at epoch {epoch + 1}",
                    epoch + 1,
                    _stats("max_epochs"),
                )
            loss.backward()
            opt.step()
            opt.zero_grad()
            total += value * batch.size
        train_losses.append(total / order.size)

        vloss, vacc = evaluate_arrays(model, val_images, val_labels)
        val_losses.append(vloss)
        val_accs.append(vacc)
        if vloss < best - cfg.early_stop.min_delta:
            best = vloss
            stale = 0
        else:
            stale += 1
            if stale >= cfg.early_stop.patience:
                stop_reason = "early"
                break

    weights = tuple((name, p.data.copy()) for name, p in model.parameters())
    return TrainedModelBundle(
        architecture=cfg.architecture,
        weights=weights,
        config=cfg,
        statistics=_stats(stop_reason),
        model_index=model_index,
    )
