"""Layer objects: parameter holders plus a forward method.

Weights use Kaiming-uniform init (bound sqrt(6 / fan_in)), biases start at
zero.  Construction takes an ``np.random.Generator`` so a model is fully
determined by its seed.
"""

from __future__ import annotations

import math
from typing import Iterator, Optional

import numpy as np

from . import functional as F
from .tensor import ShapeError, Tensor


def _kaiming_uniform(rng: np.random.Generator, shape: tuple, fan_in: int) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


class Layer:
    def parameters(self) -> list[tuple[str, Tensor]]:
        return []

    def forward(self, x: Tensor) -> Tensor:
        raise NotImplementedError

    def __call__(self, x: Tensor) -> Tensor:
        return self.forward(x)


class Conv2d(Layer):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = Tensor(
            _kaiming_uniform(rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in),
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(out_channels, dtype=np.float32), requires_grad=True)

    def parameters(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias)


class Linear(Layer):
    def __init__(self, in_features: int, out_features: int,
                 rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weight = Tensor(
            _kaiming_uniform(rng, (in_features, out_features), in_features),
            requires_grad=True,
        )
        self.bias = Tensor(np.zeros(out_features, dtype=np.float32), requires_grad=True)

    def parameters(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def forward(self, x: Tensor) -> Tensor:
        return F.linear(x, self.weight, self.bias)


class ReLU(Layer):
    def forward(self, x: Tensor) -> Tensor:
        return F.relu(x)


class Tanh(Layer):
    def forward(self, x: Tensor) -> Tensor:
        return F.tanh(x)


class MaxPool2(Layer):
    def forward(self, x: Tensor) -> Tensor:
        return F.maxpool2(x)


class Flatten(Layer):
    def forward(self, x: Tensor) -> Tensor:
        return F.flatten(x)


class Sequential(Layer):
    """Ordered chain of layers; parameter names are '{index}.{name}'."""

    def __init__(self, *layers: Layer):
        self.layers = list(layers)

    def parameters(self):
        out = []
        for i, layer in enumerate(self.layers):
            for name, p in layer.parameters():
                out.append((f"{i}.{name}", p))
        return out

    def forward(self, x: Tensor) -> Tensor:
        for layer in self.layers:
            x = layer.forward(x)
        return x

    def load_parameters(self, named: dict[str, np.ndarray]) -> None:
        """Overwrite parameter values in place from a name -> array mapping."""
        mine = dict(self.parameters())
        missing = sorted(set(mine) - set(named))
        extra = sorted(set(named) - set(mine))
        if missing or extra:
            raise ShapeError(
                f"load_parameters: missing {missing or 'none'}, unexpected {extra or 'none'}"
            )
        for name, p in mine.items():
            arr = np.ascontiguousarray(named[name], dtype=np.float32)
            if arr.shape != p.shape:
                raise ShapeError(
                    f"load_parameters: {name} shape {arr.shape} != expected {p.shape}"
                )
            p.data = arr

    def named_arrays(self) -> list[tuple[str, np.ndarray]]:
        return [(name, p.data) for name, p in self.parameters()]
