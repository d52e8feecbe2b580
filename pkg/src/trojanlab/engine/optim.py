"""SGD and Adam parameter updates.

Both optimizers refuse to step when a parameter has no gradient, which is
what "backward before forward" misuse looks like from here.
"""

from __future__ import annotations

import numpy as np

from .tensor import EngineError, ShapeError, Tensor


class OptimizerError(EngineError):
    pass


class SGD:
    """Plain gradient descent: p <- p - lr * g."""

    algorithm = "sgd"

    def __init__(self, params: list[Tensor], lr: float):
        if not params:
            raise OptimizerError("sgd: no parameters")
        self.params = list(params)
        self.lr = float(lr)
        self.step_count = 0

    def step(self) -> None:
        for p in self.params:
            if p.grad is None:
                raise OptimizerError(
                    "sgd: parameter has no gradient; run backward() before step()"
                )
            if p.grad.shape != p.data.shape:
                raise ShapeError(
                    f"sgd: gradient shape {p.grad.shape} != parameter shape {p.data.shape}"
                )
            p.data -= np.float32(self.lr) * p.grad
        self.step_count += 1

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()


class Adam:
    """Bias-corrected Adam.

    m <- b1*m + (1-b1)*g;  v <- b2*v + (1-b2)*g^2
    p <- p - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
    """

    algorithm = "adam"

    def __init__(self, params: list[Tensor], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if not params:
            raise OptimizerError("adam: no parameters")
        self.params = list(params)
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step_count = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def step(self) -> None:
        for p, m, v in zip(self.params, self.m, self.v):
            if p.grad is None:
                raise OptimizerError(
                    "adam: parameter has no gradient; run backward() before step()"
                )
            if p.grad.shape != p.data.shape:
                raise ShapeError(
                    f"adam: gradient shape {p.grad.shape} != parameter shape {p.data.shape}"
                )
        self.step_count += 1
        t = self.step_count
        bc1 = 1.0 - self.beta1 ** t
        bc2 = 1.0 - self.beta2 ** t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            mhat = m / bc1
            vhat = v / bc2
            p.data -= (self.lr * mhat / (np.sqrt(vhat) + self.eps)).astype(np.float32)

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()
