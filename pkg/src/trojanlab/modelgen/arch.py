"""Architecture registry: id string in, freshly initialized model out."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from ..engine import (
    Conv2d,
    Flatten,
    Linear,
    MaxPool2,
    ReLU,
    Sequential,
)


class ArchitectureError(Exception):
    pass


@dataclass(frozen=True)
class ArchInfo:
    input_shape: Tuple[int, int, int]  # (channels, height, width)
    n_classes: int
    builder: Callable[[np.random.Generator], Sequential]


def _build_mnist_small(rng: np.random.Generator) -> Sequential:
    # 28x28 gray: conv3 -> 26, pool -> 13, conv3 -> 11, pool -> 5, so 32*5*5
    return Sequential(
        Conv2d(1, 16, 3, rng),
        ReLU(),
        MaxPool2(),
        Conv2d(16, 32, 3, rng),
        ReLU(),
        MaxPool2(),
        Flatten(),
        Linear(32 * 5 * 5, 128, rng),
        ReLU(),
        Linear(128, 10, rng),
    )


ARCHITECTURES = {
    "mnist-small": ArchInfo((1, 28, 28), 10, _build_mnist_small),
}


def architecture_info(arch_id: str) -> ArchInfo:
    try:
        return ARCHITECTURES[arch_id]
    except KeyError:
        known = ", ".join(sorted(ARCHITECTURES))
        raise ArchitectureError(f"unknown architecture {arch_id!r}; known: {known}")


def build_architecture(arch_id: str, seed: int = 0) -> Sequential:
    """A fresh model with seed-determined initial weights."""
    info = architecture_info(arch_id)
    return info.builder(np.random.default_rng(seed))
