"""Layer-level ops: convolution, pooling, activations, classification loss.

Conv2d is stride 1, "valid" padding only, via im2col and one GEMM per batch.
MaxPool2 is a fixed 2x2 window with stride 2; odd trailing rows/columns are
dropped (floor semantics).
"""

from __future__ import annotations

from typing import Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .tensor import ShapeError, Tensor, _result, add


def relu(a: Tensor) -> Tensor:
    out = _result(np.maximum(a.data, 0.0), "relu", (a,))

    def _bw():
        if a.requires_grad:
            a.accumulate_grad(out.grad * (a.data > 0.0))

    out._backward = _bw
    return out


def tanh(a: Tensor) -> Tensor:
    out = _result(np.tanh(a.data), "tanh", (a,))

    def _bw():
        if a.requires_grad:
            a.accumulate_grad(out.grad * (1.0 - out.data * out.data))

    out._backward = _bw
    return out


def sigmoid(a: Tensor) -> Tensor:
    # exp of the negated magnitude avoids overflow at either tail
    x = a.data
    out_data = np.empty_like(x)
    pos = x >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out_data[~pos] = ex / (1.0 + ex)
    out = _result(out_data, "sigmoid", (a,))

    def _bw():
        if a.requires_grad:
            a.accumulate_grad(out.grad * out.data * (1.0 - out.data))

    out._backward = _bw
    return out


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """x (N, Din) @ weight (Din, Dout) + bias (Dout,)."""
    if x.ndim != 2 or weight.ndim != 2:
        raise ShapeError(f"linear: expects 2-D input/weight, got {x.shape}, {weight.shape}")
    if x.shape[1] != weight.shape[0]:
        raise ShapeError(
            f"linear: input features {x.shape[1]} != weight rows {weight.shape[0]}"
        )
    out = _result(x.data @ weight.data, "linear", (x, weight))

    def _bw():
        g = out.grad
        if x.requires_grad:
            x.accumulate_grad(np.ascontiguousarray(g @ weight.data.T))
        if weight.requires_grad:
            weight.accumulate_grad(np.ascontiguousarray(x.data.T @ g))

    out._backward = _bw
    if bias is not None:
        if bias.shape != (weight.shape[1],):
            raise ShapeError(
                f"linear: bias shape {bias.shape} != ({weight.shape[1]},)"
            )
        out = add(out, bias)
    return out


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """2-D convolution, stride 1, valid padding.

    x: (N, Cin, H, W); weight: (Cout, Cin, kh, kw); bias: (Cout,).
    Output: (N, Cout, H-kh+1, W-kw+1).
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise ShapeError(f"conv2d: expects 4-D input/weight, got {x.shape}, {weight.shape}")
    n, cin, h, w = x.shape
    cout, cin_w, kh, kw = weight.shape
    if cin != cin_w:
        raise ShapeError(
            f"conv2d: input channels {cin} != weight channels {cin_w} "
            f"(input {x.shape}, weight {weight.shape})"
        )
    if h < kh or w < kw:
        raise ShapeError(
            f"conv2d: kernel ({kh}x{kw}) larger than input ({h}x{w})"
        )
    ho, wo = h - kh + 1, w - kw + 1

    windows = sliding_window_view(x.data, (kh, kw), axis=(2, 3))
    # (N, Cin, Ho, Wo, kh, kw) -> (N*Ho*Wo, Cin*kh*kw)
    cols = np.ascontiguousarray(windows.transpose(0, 2, 3, 1, 4, 5)).reshape(
        n * ho * wo, cin * kh * kw
    )
    wmat = weight.data.reshape(cout, cin * kh * kw).T
    out_data = np.ascontiguousarray(
        (cols @ wmat).reshape(n, ho, wo, cout).transpose(0, 3, 1, 2)
    )
    out = _result(out_data, "conv2d", (x, weight))

    def _bw():
        g = out.grad
        gmat = np.ascontiguousarray(g.transpose(0, 2, 3, 1)).reshape(n * ho * wo, cout)
        if weight.requires_grad:
            dw = (cols.T @ gmat).T.reshape(cout, cin, kh, kw)
            weight.accumulate_grad(np.ascontiguousarray(dw))
        if x.requires_grad:
            dcols = (gmat @ wmat.T).reshape(n, ho, wo, cin, kh, kw)
            dx = np.zeros((n, cin, h, w), dtype=np.float32)
            # scatter-add per kernel offset (kh*kw iterations)
            for i in range(kh):
                for j in range(kw):
                    dx[:, :, i : i + ho, j : j + wo] += dcols[:, :, :, :, i, j].transpose(
                        0, 3, 1, 2
                    )
            x.accumulate_grad(dx)

    out._backward = _bw
    if bias is not None:
        if bias.shape != (cout,):
            raise ShapeError(f"conv2d: bias shape {bias.shape} != ({cout},)")
        out = add(out, _reshape_bias(bias, cout))
    return out


def _reshape_bias(bias: Tensor, cout: int) -> Tensor:
    from .tensor import reshape

    return reshape(bias, (cout, 1, 1))


def maxpool2(x: Tensor) -> Tensor:
    """2x2 max pooling with stride 2 on (N, C, H, W); floor on odd dims."""
    if x.ndim != 4:
        raise ShapeError(f"maxpool2: expects 4-D input, got {x.shape}")
    n, c, h, w = x.shape
    if h < 2 or w < 2:
        raise ShapeError(f"maxpool2: input spatial dims ({h}x{w}) below 2x2")
    ho, wo = h // 2, w // 2
    cropped = x.data[:, :, : ho * 2, : wo * 2]
    tiles = cropped.reshape(n, c, ho, 2, wo, 2).transpose(0, 1, 2, 4, 3, 5).reshape(
        n, c, ho, wo, 4
    )
    arg = tiles.argmax(axis=-1)
    out_data = np.ascontiguousarray(np.take_along_axis(tiles, arg[..., None], axis=-1)[..., 0])
    out = _result(out_data, "maxpool2", (x,))

    def _bw():
        if not x.requires_grad:
            return
        g = out.grad
        dtiles = np.zeros((n, c, ho, wo, 4), dtype=np.float32)
        np.put_along_axis(dtiles, arg[..., None], g[..., None], axis=-1)
        dx = np.zeros((n, c, h, w), dtype=np.float32)
        dx[:, :, : ho * 2, : wo * 2] = (
            dtiles.reshape(n, c, ho, wo, 2, 2).transpose(0, 1, 2, 4, 3, 5).reshape(
                n, c, ho * 2, wo * 2
            )
        )
        x.accumulate_grad(dx)

    out._backward = _bw
    return out


def flatten(x: Tensor) -> Tensor:
    """Collapse all trailing dims: (N, ...) -> (N, prod(...))."""
    from .tensor import reshape

    if x.ndim < 2:
        raise ShapeError(f"flatten: expects batched input, got {x.shape}")
    return reshape(x, (x.shape[0], int(np.prod(x.shape[1:]))))


def softmax(logits: Tensor) -> Tensor:
    """Row-wise softmax over the last axis, stable for large logits."""
    if logits.ndim != 2:
        raise ShapeError(f"softmax: expects 2-D logits, got {logits.shape}")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    e = np.exp(z)
    p = e / e.sum(axis=1, keepdims=True)
    out = _result(p, "softmax", (logits,))

    def _bw():
        if logits.requires_grad:
            g = out.grad
            dot = (g * p).sum(axis=1, keepdims=True)
            logits.accumulate_grad(p * (g - dot))

    out._backward = _bw
    return out


def log_softmax(logits: Tensor) -> Tensor:
    if logits.ndim != 2:
        raise ShapeError(f"log_softmax: expects 2-D logits, got {logits.shape}")
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    out_data = z - lse
    out = _result(out_data, "log_softmax", (logits,))

    def _bw():
        if logits.requires_grad:
            g = out.grad
            p = np.exp(out.data)
            logits.accumulate_grad(g - p * g.sum(axis=1, keepdims=True))

    out._backward = _bw
    return out


def softmax_cross_entropy(logits: Tensor, labels: np.ndarray) -> Tensor:
    """Mean cross-entropy between row-wise softmax(logits) and integer labels.

    ``labels`` is a plain integer array of shape (N,), not a graph node.
    """
    if logits.ndim != 2:
        raise ShapeError(f"softmax_cross_entropy: expects 2-D logits, got {logits.shape}")
    labels = np.asarray(labels)
    if labels.shape != (logits.shape[0],):
        raise ShapeError(
            f"softmax_cross_entropy: labels shape {labels.shape} != ({logits.shape[0]},)"
        )
    n, k = logits.shape
    if labels.min() < 0 or labels.max() >= k:
        raise ShapeError(
            f"softmax_cross_entropy: label outside [0, {k}) in batch"
        )
    z = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    losses = -logp[np.arange(n), labels]
    out = _result(np.asarray(losses.mean(), dtype=np.float32), "softmax_cross_entropy", (logits,))

    def _bw():
        if logits.requires_grad:
            p = np.exp(logp)
            p[np.arange(n), labels] -= 1.0
            scale = float(out.grad.reshape(())) / n
            logits.accumulate_grad((p * scale).astype(np.float32))

    out._backward = _bw
    return out


def gather_rows(x: Tensor, index: np.ndarray) -> Tensor:
    """Pick one column per row: out[i] = x[i, index[i]]."""
    if x.ndim != 2:
        raise ShapeError(f"gather_rows: expects 2-D input, got {x.shape}")
    index = np.asarray(index)
    if index.shape != (x.shape[0],):
        raise ShapeError(f"gather_rows: index shape {index.shape} != ({x.shape[0]},)")
    rows = np.arange(x.shape[0])
    out = _result(x.data[rows, index], "gather_rows", (x,))

    def _bw():
        if x.requires_grad:
            dx = np.zeros_like(x.data)
            dx[rows, index] = out.grad
            x.accumulate_grad(dx)

    out._backward = _bw
    return out


def minimum(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise min; on ties the gradient goes to the first operand."""
    if a.shape != b.shape:
        raise ShapeError(f"minimum: shapes {a.shape} and {b.shape} differ")
    take_a = a.data <= b.data
    out = _result(np.where(take_a, a.data, b.data), "minimum", (a, b))

    def _bw():
        g = out.grad
        if a.requires_grad:
            a.accumulate_grad(g * take_a)
        if b.requires_grad:
            b.accumulate_grad(g * ~take_a)

    out._backward = _bw
    return out


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp values to [lo, hi]; the gradient is zero outside the interval."""
    inside = (a.data >= lo) & (a.data <= hi)
    out = _result(np.clip(a.data, lo, hi), "clip", (a,))

    def _bw():
        if a.requires_grad:
            a.accumulate_grad(out.grad * inside)

    out._backward = _bw
    return out
