"""Analytic gradients vs. central finite differences for every layer type.

The full 100-seed sweep lives in the acceptance suite; this file runs a
smaller sweep for fast iteration plus the worked examples with exact
expectations.
"""

import numpy as np
import pytest

from trojanlab.engine import (
    Tensor,
    conv2d,
    maxpool2,
    softmax,
    softmax_cross_entropy,
)
from gradcheck_lib import LAYER_KINDS, run_gradcheck
from oracles import conv2d_reference


@pytest.mark.parametrize("kind", LAYER_KINDS)
@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_gradcheck(kind, seed):
    failures = run_gradcheck(kind, seed)
    assert not failures, "; ".join(failures)


def test_identity_conv_passes_input_through():
    # 1x1 kernel of weight 1 is the identity map
    x = np.arange(16, dtype=np.float32).reshape(1, 1, 4, 4)
    w = np.ones((1, 1, 1, 1), dtype=np.float32)
    out = conv2d(Tensor(x), Tensor(w))
    np.testing.assert_array_equal(out.data, x)


def test_conv2d_matches_naive_reference():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((2, 3, 7, 6)).astype(np.float32)
    w = rng.standard_normal((4, 3, 3, 3)).astype(np.float32)
    b = rng.standard_normal(4).astype(np.float32)
    out = conv2d(Tensor(x), Tensor(w), Tensor(b))
    ref = conv2d_reference(x, w, b)
    np.testing.assert_allclose(out.data, ref, rtol=1e-4, atol=1e-4)


def test_maxpool_worked_example():
    # [[1,2],[3,4]] pools to [[4]]
    x = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32).reshape(1, 1, 2, 2)
    out = maxpool2(Tensor(x))
    assert out.shape == (1, 1, 1, 1)
    assert out.data[0, 0, 0, 0] == 4.0


def test_maxpool_odd_dims_floor():
    # 5x5 input crops to 4x4 before pooling: output 2x2
    x = np.arange(25, dtype=np.float32).reshape(1, 1, 5, 5)
    out = maxpool2(Tensor(x))
    assert out.shape == (1, 1, 2, 2)
    np.testing.assert_array_equal(out.data[0, 0], [[6.0, 8.0], [16.0, 18.0]])


def test_maxpool_backward_routes_to_argmax_only():
    x = Tensor(
        np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32).reshape(1, 1, 2, 2),
        requires_grad=True,
    )
    from trojanlab.engine import tensor_sum

    tensor_sum(maxpool2(x)).backward()
    np.testing.assert_array_equal(
        x.grad[0, 0], [[0.0, 0.0], [0.0, 1.0]]
    )


def test_softmax_rows_sum_to_one_extreme_logits():
    logits = np.array(
        [[-50.0, 0.0, 50.0], [50.0, 49.0, -50.0], [0.0, 0.0, 0.0]],
        dtype=np.float32,
    )
    p = softmax(Tensor(logits)).data
    assert np.all(np.isfinite(p))
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-5)


def test_cross_entropy_finite_on_extreme_logits():
    rng = np.random.default_rng(3)
    logits = rng.uniform(-50.0, 50.0, size=(16, 10)).astype(np.float32)
    labels = rng.integers(0, 10, size=16)
    loss = softmax_cross_entropy(Tensor(logits, requires_grad=True), labels)
    assert np.isfinite(loss.item())
    loss.backward()


def test_cross_entropy_matches_log_softmax_composition():
    rng = np.random.default_rng(11)
    logits = rng.standard_normal((8, 5)).astype(np.float32)
    labels = rng.integers(0, 5, size=8)
    fused = softmax_cross_entropy(Tensor(logits), labels)
    p = softmax(Tensor(logits)).data
    manual = -np.mean(np.log(p[np.arange(8), labels]))
    assert fused.item() == pytest.approx(manual, rel=1e-5)


def test_cross_entropy_rejects_out_of_range_labels():
    logits = Tensor(np.zeros((2, 3), dtype=np.float32))
    with pytest.raises(Exception):
        softmax_cross_entropy(logits, np.array([0, 3]))
