"""Trigger reverse engineering and mask-mass anomaly detection.

For each candidate target label, gradient descent recovers the smallest
input patch that flips clean samples to that label when blended in. A
genuinely trojaned label needs far less mask mass than the others, so a
median-absolute-deviation test over the per-label masses exposes it.
"""

from __future__ import annotations

import csv
import os
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .datagen.corpus import save_image
from .engine import Adam, GraphError, Tensor
from .engine.functional import sigmoid, softmax_cross_entropy
from .engine.tensor import add, broadcast_to, mul, reshape, sub, tensor_sum
from .modelgen.arch import architecture_info
from .modelgen.bundle import instantiate
from .modelgen.runner import TrainedModelBundle, forward_logits

MAD_SCALE = 1.4826


class DetectError(Exception):
    pass


class MADDegeneracyWarning(UserWarning):
    """All masses equal: the anomaly index is undefined, treated as zero."""


@dataclass(frozen=True)
class DetectOptions:
    """Knobs for the per-label optimization and the anomaly test."""

    lambda_init: float = 1e-3
    steps: int = 1000
    batch_size: int = 32
    learning_rate: float = 0.1
    check_every: int = 10
    success_threshold: float = 0.99
    schedule_patience: int = 5
    anomaly_threshold: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.lambda_init < 0:
            raise DetectError(f"lambda_init must be >= 0, got {self.lambda_init}")
        if self.steps < 1 or self.batch_size < 1 or self.check_every < 1:
            raise DetectError("steps, batch_size and check_every must be >= 1")
        if not 0.0 < self.success_threshold <= 1.0:
            raise DetectError(
                f"success_threshold must be in (0, 1], got {self.success_threshold}"
            )
        if self.schedule_patience < 1:
            raise DetectError("schedule_patience must be >= 1")


@dataclass(frozen=True, eq=False)
class ReversedTrigger:
    mask: np.ndarray  # (H, W) in [0, 1]
    pattern: np.ndarray  # (H, W, C) in [0, 1]
    l1_mass: float
    target_label: int
    steps_used: int
    success_rate: float
    low_confidence: bool

    def __post_init__(self):
        if self.mask.min() < 0.0 or self.mask.max() > 1.0:
            raise DetectError("mask values outside [0, 1]")
        if self.pattern.min() < 0.0 or self.pattern.max() > 1.0:
            raise DetectError("pattern values outside [0, 1]")
        if abs(self.l1_mass - float(self.mask.sum())) > 1e-4:
            raise DetectError("l1_mass disagrees with the mask sum")


@dataclass(frozen=True)
class AnomalyResult:
    indices: Tuple[float, ...]
    flagged: Tuple[int, ...]
    degenerate: bool


@dataclass(frozen=True, eq=False)
class DetectionReport:
    masses: Tuple[float, ...]
    anomaly_indices: Tuple[float, ...]
    flagged: Tuple[int, ...]
    verdict: str  # "anomalous" | "clean"
    degenerate: bool
    triggers: Tuple[ReversedTrigger, ...]


def mad_anomaly(
    masses: Sequence[float], threshold: float = 2.0
) -> AnomalyResult:
    """Score each mass by its deviation from the median, in MAD units.

    A label is flagged only when it is both an outlier and on the small
    side: a trojaned label needs less mask, never more.
    """
    if len(masses) < 3:
        raise DetectError(f"need at least 3 labels, got {len(masses)}")
    m = np.asarray(masses, dtype=np.float64)
    median = np.median(m)
    mad = np.median(np.abs(m - median))
    if mad == 0.0:
        warnings.warn(
            "MAD is zero; anomaly indices are degenerate and no label is flagged",
            MADDegeneracyWarning,
        )
        return AnomalyResult(
            indices=tuple(0.0 for _ in m), flagged=(), degenerate=True
        )
    indices = np.abs(m - median) / (MAD_SCALE * mad)
    flagged = tuple(
        i for i in range(m.size) if indices[i] > threshold and m[i] < median
    )
    return AnomalyResult(
        indices=tuple(float(v) for v in indices), flagged=flagged, degenerate=False
    )


def _validate_samples(images: np.ndarray, labels: np.ndarray, n_classes: int) -> None:
    if images.ndim != 4:
        raise DetectError(f"expected (N, C, H, W) images, got shape {images.shape}")
    if images.shape[0] != labels.shape[0]:
        raise DetectError("images and labels disagree on sample count")
    if images.shape[0] < 100:
        raise DetectError(
            f"need at least 100 clean samples, got {images.shape[0]}"
        )
    present = set(int(v) for v in np.unique(labels))
    missing = sorted(set(range(n_classes)) - present)
    if missing:
        raise DetectError(f"clean samples missing classes {missing}")


def _blend_numpy(
    images: np.ndarray, mask: np.ndarray, pattern_chw: np.ndarray
) -> np.ndarray:
    return images * (1.0 - mask) + pattern_chw[None, :, :, :] * mask


def _success_rate(model, images, mask, pattern_chw, target) -> float:
    blended = _blend_numpy(images, mask, pattern_chw).astype(np.float32)
    pred = np.argmax(forward_logits(model, blended), axis=1)
    return float(np.mean(pred == target))


def reverse_engineer_trigger(
    bundle: TrainedModelBundle,
    images: np.ndarray,
    labels: np.ndarray,
    target_label: int,
    options: DetectOptions = DetectOptions(),
) -> ReversedTrigger:
    """Optimize a (mask, pattern) pair that steers inputs to target_label.

    Minimizes CE(f((1-mask) * x + mask * pattern), target) + lambda * ||mask||_1
    through the frozen model, with mask and pattern kept in [0, 1] by a
    sigmoid reparameterization. lambda adapts: after schedule_patience
    consecutive checks at or above the success threshold it doubles, after
    as many below it halves. The returned trigger is the best checked
    iterate, ordered by (success >= threshold, then minimal mass).
    """
    info = architecture_info(bundle.architecture)
    _validate_samples(images, labels, info.n_classes)
    if not 0 <= target_label < info.n_classes:
        raise DetectError(f"target label {target_label} outside 0..{info.n_classes - 1}")

    model = instantiate(bundle)
    for _, param in model.parameters():
        param.requires_grad = False

    n, c, h, w = images.shape
    rng = np.random.default_rng([options.seed, target_label])
    mask_logit = Tensor(
        rng.normal(MASK_LOGIT_INIT, 1.0, size=(h, w)), requires_grad=True
    )
    pattern_logit = Tensor(
        rng.normal(PATTERN_LOGIT_INIT, 1.0, size=(c, h, w)), requires_grad=True
    )
    optimizer = Adam([mask_logit, pattern_logit], lr=options.learning_rate)

    lam = options.lambda_init
    above = below = 0
    best: Optional[dict] = None
    target_batch = np.full(options.batch_size, target_label, dtype=np.int64)

    for step in range(1, options.steps + 1):
        idx = rng.integers(0, n, size=options.batch_size)
        xb = Tensor(images[idx])
        mask = sigmoid(mask_logit)
        pattern = sigmoid(pattern_logit)
        mask_b = broadcast_to(reshape(mask, (1, 1, h, w)), xb.shape)
        pattern_b = broadcast_to(reshape(pattern, (1, c, h, w)), xb.shape)
        blended = add(mul(xb, sub(Tensor(1.0), mask_b)), mul(pattern_b, mask_b))
        ce = softmax_cross_entropy(model(blended), target_batch)
        loss = add(ce, mul(tensor_sum(mask), Tensor(lam)))

        optimizer.zero_grad()
        try:
            loss.backward()
        except GraphError as exc:
            raise DetectError(f"model does not support gradients: {exc}") from exc
        optimizer.step()

        if step % options.check_every == 0 or step == options.steps:
            cur_mask = 1.0 / (1.0 + np.exp(-mask_logit.data))
            cur_pattern = 1.0 / (1.0 + np.exp(-pattern_logit.data))
            success = _success_rate(model, images, cur_mask, cur_pattern, target_label)
            mass = float(cur_mask.sum())
            candidate = {
                "mask": cur_mask.copy(),
                "pattern": cur_pattern.copy(),
                "mass": mass,
                "success": success,
                "step": step,
            }
            if _improves(candidate, best, options.success_threshold):
                best = candidate
            if success >= options.success_threshold:
                above += 1
                below = 0
                if above >= options.schedule_patience:
                    lam *= 2.0
                    above = 0
            else:
                below += 1
                above = 0
                if below >= options.schedule_patience:
                    lam /= 2.0
                    below = 0

    assert best is not None  # loop always checks the final step
    return ReversedTrigger(
        mask=best["mask"].astype(np.float32),
        pattern=np.transpose(best["pattern"], (1, 2, 0)).astype(np.float32),
        l1_mass=best["mass"],
        target_label=target_label,
        steps_used=options.steps,
        success_rate=best["success"],
        low_confidence=best["success"] < 0.5,
    )


def _improves(candidate: dict, best: Optional[dict], threshold: float) -> bool:
    """Lexicographic: reaching the success bar first, then smaller mass."""
    if best is None:
        return True
    cand_ok = candidate["success"] >= threshold
    best_ok = best["success"] >= threshold
    if cand_ok != best_ok:
        return cand_ok
    if cand_ok:
        return candidate["mass"] < best["mass"]
    return candidate["success"] > best["success"]


def detect(
    bundle: TrainedModelBundle,
    images: np.ndarray,
    labels: np.ndarray,
    options: DetectOptions = DetectOptions(),
) -> DetectionReport:
    """Reverse-engineer every label, then flag outlier mask masses."""
    info = architecture_info(bundle.architecture)
    _validate_samples(images, labels, info.n_classes)
    triggers = tuple(
        reverse_engineer_trigger(bundle, images, labels, label, options)
        for label in range(info.n_classes)
    )
    masses = tuple(t.l1_mass for t in triggers)
    anomaly = mad_anomaly(masses, threshold=options.anomaly_threshold)
    return DetectionReport(
        masses=masses,
        anomaly_indices=anomaly.indices,
        flagged=anomaly.flagged,
        verdict="anomalous" if anomaly.flagged else "clean",
        degenerate=anomaly.degenerate,
        triggers=triggers,
    )


def save_detection(
    report: DetectionReport, out_dir: Union[str, os.PathLike]
) -> dict:
    """Write report.csv plus per-label mask/pattern PNGs; returns paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "report.csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "l1_mass", "anomaly_index", "flagged"])
        for label, (mass, index) in enumerate(
            zip(report.masses, report.anomaly_indices)
        ):
            writer.writerow(
                [label, f"{mass:.6f}", f"{index:.6f}", str(label in report.flagged)]
            )
        writer.writerow(["verdict", report.verdict, "", ""])
    paths = {"report": str(csv_path)}
    for trigger in report.triggers:
        label = trigger.target_label
        mask_path = out / f"mask_{label:02d}.png"
        pattern_path = out / f"pattern_{label:02d}.png"
        save_image(mask_path, trigger.mask)
        save_image(pattern_path, trigger.pattern)
        paths[f"mask_{label}"] = str(mask_path)
        paths[f"pattern_{label}"] = str(pattern_path)
    return paths
