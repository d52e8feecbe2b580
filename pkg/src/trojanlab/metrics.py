"""Trojan-success metrics and the model-yield filter.

Three accuracies tell the story of an embedded trojan: clean test
accuracy (the model still works), triggered test accuracy against the
poisoned target label (the trigger works), and clean accuracy restricted
to the poisoned source class (the trojan stays dormant without its
trigger).
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .experiment import load_experiment
from .modelgen.bundle import instantiate
from .modelgen.data import DataManager
from .modelgen.runner import TrainedModelBundle, forward_logits


class MetricsError(Exception):
    pass


@dataclass(frozen=True)
class SubsetAccuracy:
    correct: int
    total: int

    def __post_init__(self):
        if self.total <= 0:
            raise MetricsError("accuracy needs a non-empty subset")
        if not 0 <= self.correct <= self.total:
            raise MetricsError(f"correct {self.correct} outside [0, {self.total}]")

    @property
    def value(self) -> float:
        return self.correct / self.total


@dataclass(frozen=True)
class TrojanMetrics:
    clean_acc: SubsetAccuracy
    triggered_acc: SubsetAccuracy
    clean_triggered_label_acc: SubsetAccuracy


def _subset(predictions: np.ndarray, targets: np.ndarray, name: str) -> SubsetAccuracy:
    if targets.size == 0:
        raise MetricsError(f"empty evaluation subset: {name}")
    return SubsetAccuracy(int(np.sum(predictions == targets)), int(targets.size))


def evaluate_bundle(
    bundle: TrainedModelBundle,
    test_clean_csv: Optional[Union[str, os.PathLike]] = None,
    test_triggered_csv: Optional[Union[str, os.PathLike]] = None,
    corpus_root: Optional[Union[str, os.PathLike]] = None,
) -> TrojanMetrics:
    """Compute the three accuracies for one trained model.

    Paths default to the experiment recorded in the bundle's config. The
    poisoned source class is read off the triggered-test definition (its
    rows' true labels), so no separate policy argument is needed.
    """
    cfg = bundle.config
    clean_csv = test_clean_csv if test_clean_csv is not None else cfg.test_clean_csv
    trig_csv = (
        test_triggered_csv if test_triggered_csv is not None else cfg.test_triggered_csv
    )
    root = corpus_root if corpus_root is not None else cfg.corpus_root

    manager = DataManager(root)
    clean = manager.load(clean_csv)

    trig_records, report = load_experiment(trig_csv, corpus_root=root)
    if not report.ok:
        raise MetricsError(f"invalid triggered test set: {report.violations[0]}")
    if not trig_records:
        raise MetricsError("empty evaluation subset: triggered test")
    sources = {r.true_label for r in trig_records}
    if len(sources) != 1:
        raise MetricsError(
            f"triggered test set mixes source labels {sorted(sources)}"
        )
    source_label = sources.pop()
    triggered = manager.load_records(trig_records)

    model = instantiate(bundle)
    clean_pred = np.argmax(forward_logits(model, clean.images), axis=1)
    trig_pred = np.argmax(forward_logits(model, triggered.images), axis=1)

    source_rows = clean.true_labels == source_label
    return TrojanMetrics(
        clean_acc=_subset(clean_pred, clean.true_labels, "clean test"),
        triggered_acc=_subset(trig_pred, triggered.train_labels, "triggered test"),
        clean_triggered_label_acc=_subset(
            clean_pred[source_rows],
            clean.true_labels[source_rows],
            "clean test rows of the poisoned class",
        ),
    )


def yield_filter(
    metrics: Sequence[TrojanMetrics], threshold: float = 0.95
) -> Tuple[List[bool], int]:
    """Which models clear the bar on all three accuracies, and how many.

    The pass rule is a strict conjunction; raising the threshold can only
    shrink the yield.
    """
    if not 0.0 < threshold <= 1.0:
        raise MetricsError(f"threshold must be in (0, 1], got {threshold}")
    passes = [
        m.clean_acc.value >= threshold
        and m.triggered_acc.value >= threshold
        and m.clean_triggered_label_acc.value >= threshold
        for m in metrics
    ]
    return passes, sum(passes)
