"""Minimal float32 tensor engine with reverse-mode autodiff.

Everything here is deliberately small: dense tensors, a define-by-run graph,
the handful of layers needed for small convolutional classifiers and
actor-critic policies, SGD/Adam, and a binary weight container.
"""

from .tensor import (
    EngineError,
    GraphError,
    ShapeError,
    Tensor,
    add,
    broadcast_to,
    exp,
    log,
    matmul,
    mean,
    mul,
    neg,
    reshape,
    sub,
    tensor_sum,
)
from .functional import (
    clip,
    conv2d,
    flatten,
    gather_rows,
    linear,
    log_softmax,
    maxpool2,
    minimum,
    relu,
    sigmoid,
    softmax,
    softmax_cross_entropy,
    tanh,
)
from .layers import Conv2d, Flatten, Linear, MaxPool2, ReLU, Sequential, Tanh
from .optim import SGD, Adam, OptimizerError
from .serialize import (
    FORMAT_VERSION,
    MAGIC,
    CorruptWeightsError,
    WeightsVersionError,
    read_weights,
    write_weights,
)

__all__ = [
    "EngineError",
    "GraphError",
    "ShapeError",
    "Tensor",
    "add",
    "sub",
    "mul",
    "neg",
    "matmul",
    "reshape",
    "tensor_sum",
    "mean",
    "exp",
    "log",
    "broadcast_to",
    "relu",
    "tanh",
    "sigmoid",
    "linear",
    "conv2d",
    "maxpool2",
    "flatten",
    "softmax",
    "log_softmax",
    "softmax_cross_entropy",
    "gather_rows",
    "minimum",
    "clip",
    "Conv2d",
    "Linear",
    "ReLU",
    "Tanh",
    "MaxPool2",
    "Flatten",
    "Sequential",
    "SGD",
    "Adam",
    "OptimizerError",
    "MAGIC",
    "FORMAT_VERSION",
    "CorruptWeightsError",
    "WeightsVersionError",
    "read_weights",
    "write_weights",
]
