"""Tensor graph semantics: dtype policy, broadcasting rules, backward
traversal, and the small worked examples."""

import numpy as np
import pytest

from trojanlab.engine import (
    GraphError,
    ShapeError,
    Tensor,
    add,
    broadcast_to,
    matmul,
    mean,
    mul,
    neg,
    relu,
    reshape,
    sub,
    tensor_sum,
)


def test_data_coerced_to_float32():
    t = Tensor(np.arange(4, dtype=np.int64))
    assert t.data.dtype == np.float32
    t2 = Tensor([1.5, 2.5])
    assert t2.data.dtype == np.float32


def test_grad_dtype_float32_after_backward():
    x = Tensor(np.ones((3,), dtype=np.float32), requires_grad=True)
    y = tensor_sum(mul(x, x))
    y.backward()
    assert x.grad.dtype == np.float32


def test_empty_tensor_rejected():
    with pytest.raises(ShapeError):
        Tensor(np.zeros((0, 3), dtype=np.float32))


def test_scalar_item_and_shape():
    t = Tensor(np.float32(2.5))
    assert t.shape == ()
    assert t.item() == pytest.approx(2.5)


def test_add_same_shape_values():
    a = Tensor([[1.0, 2.0], [3.0, 4.0]])
    b = Tensor([[10.0, 20.0], [30.0, 40.0]])
    c = add(a, b)
    np.testing.assert_array_equal(c.data, [[11.0, 22.0], [33.0, 44.0]])


def test_add_bias_broadcast_gradient_sums_over_batch():
    x = Tensor(np.zeros((4, 3), dtype=np.float32), requires_grad=True)
    b = Tensor(np.zeros((3,), dtype=np.float32), requires_grad=True)
    out = tensor_sum(add(x, b))
    out.backward()
    assert b.grad.shape == (3,)
    np.testing.assert_array_equal(b.grad, np.full((3,), 4.0, dtype=np.float32))
    np.testing.assert_array_equal(x.grad, np.ones((4, 3), dtype=np.float32))


def test_add_rejects_incompatible_shapes():
    a = Tensor(np.zeros((4, 3), dtype=np.float32))
    b = Tensor(np.zeros((2, 3), dtype=np.float32))
    with pytest.raises(ShapeError):
        add(a, b)


def test_add_rejects_broadcast_that_would_grow_left_operand():
    # (3,) + (4,3) broadcasts in numpy but the result outgrows a; the
    # engine only supports bias-style broadcast into the left operand.
    a = Tensor(np.zeros((3,), dtype=np.float32))
    b = Tensor(np.zeros((4, 3), dtype=np.float32))
    with pytest.raises(ShapeError):
        add(a, b)


def test_mul_requires_same_shape_or_scalar():
    a = Tensor(np.zeros((2, 2), dtype=np.float32))
    b = Tensor(np.zeros((2,), dtype=np.float32))
    with pytest.raises(ShapeError):
        mul(a, b)
    # scalar is fine
    c = mul(a, Tensor(np.float32(3.0)))
    assert c.shape == (2, 2)


def test_matmul_two_d_only():
    a = Tensor(np.zeros((2, 3, 4), dtype=np.float32))
    b = Tensor(np.zeros((4, 5), dtype=np.float32))
    with pytest.raises(ShapeError):
        matmul(a, b)


def test_matmul_inner_dim_mismatch_message_names_dims():
    a = Tensor(np.zeros((2, 3), dtype=np.float32))
    b = Tensor(np.zeros((4, 5), dtype=np.float32))
    with pytest.raises(ShapeError) as excinfo:
        matmul(a, b)
    msg = str(excinfo.value)
    assert "3" in msg and "4" in msg


def test_backward_requires_scalar():
    x = Tensor(np.ones((2, 2), dtype=np.float32), requires_grad=True)
    y = mul(x, x)
    with pytest.raises(GraphError):
        y.backward()


def test_backward_on_non_grad_tensor_raises():
    x = Tensor(np.ones((2, 2), dtype=np.float32))
    y = tensor_sum(x)
    with pytest.raises(GraphError):
        y.backward()


def test_diamond_graph_accumulates_both_paths():
    # y = x*x + x*x: dy/dx = 4x, exercises grad accumulation at a shared node
    x = Tensor(np.array([3.0], dtype=np.float32), requires_grad=True)
    sq = mul(x, x)
    y = tensor_sum(add(sq, sq))
    y.backward()
    np.testing.assert_allclose(x.grad, [12.0], rtol=1e-6)


def test_reused_leaf_accumulates():
    x = Tensor(np.array([2.0], dtype=np.float32), requires_grad=True)
    y = tensor_sum(add(mul(x, x), x))  # x^2 + x, grad 2x + 1
    y.backward()
    np.testing.assert_allclose(x.grad, [5.0], rtol=1e-6)


def test_grad_none_until_backward_and_zero_grad_resets():
    x = Tensor(np.ones((2,), dtype=np.float32), requires_grad=True)
    assert x.grad is None
    y = tensor_sum(x)
    y.backward()
    assert x.grad is not None
    x.zero_grad()
    assert x.grad is None


def test_two_backward_calls_accumulate_into_leaves():
    # calling backward twice on fresh graphs over the same leaf adds grads
    x = Tensor(np.ones((3,), dtype=np.float32), requires_grad=True)
    tensor_sum(x).backward()
    tensor_sum(x).backward()
    np.testing.assert_array_equal(x.grad, np.full((3,), 2.0, dtype=np.float32))


def test_detach_cuts_graph():
    x = Tensor(np.ones((2,), dtype=np.float32), requires_grad=True)
    d = x.detach()
    assert not d.requires_grad
    y = tensor_sum(mul(d, d))
    with pytest.raises(GraphError):
        y.backward()


def test_neg_and_sub():
    a = Tensor([5.0, 1.0])
    b = Tensor([2.0, 7.0])
    np.testing.assert_array_equal(sub(a, b).data, [3.0, -6.0])
    np.testing.assert_array_equal(neg(a).data, [-5.0, -1.0])


def test_reshape_roundtrip_grad():
    x = Tensor(np.arange(6, dtype=np.float32).reshape(2, 3), requires_grad=True)
    y = tensor_sum(mul(reshape(x, (3, 2)), reshape(x, (3, 2))))
    y.backward()
    np.testing.assert_allclose(x.grad, 2.0 * x.data, rtol=1e-6)


def test_reshape_rejects_bad_size():
    x = Tensor(np.zeros((2, 3), dtype=np.float32))
    with pytest.raises(ShapeError):
        reshape(x, (4, 2))


def test_sum_axis_and_mean():
    x = Tensor(np.arange(6, dtype=np.float32).reshape(2, 3))
    np.testing.assert_array_equal(tensor_sum(x, axis=0).data, [3.0, 5.0, 7.0])
    assert mean(x).item() == pytest.approx(2.5)


def test_broadcast_to_backward_sums():
    x = Tensor(np.array([1.0, 2.0], dtype=np.float32), requires_grad=True)
    y = broadcast_to(x, (3, 2))
    tensor_sum(y).backward()
    np.testing.assert_array_equal(x.grad, [3.0, 3.0])


def test_operator_sugar_matches_functions():
    a = Tensor([1.0, 2.0])
    b = Tensor([3.0, 4.0])
    np.testing.assert_array_equal((a + b).data, add(a, b).data)
    np.testing.assert_array_equal((a - b).data, sub(a, b).data)
    np.testing.assert_array_equal((a * b).data, mul(a, b).data)
    np.testing.assert_array_equal((-a).data, neg(a).data)


def test_relu_worked_example():
    # relu([-1, 0, 2]) = [0, 0, 2]
    x = Tensor([-1.0, 0.0, 2.0])
    np.testing.assert_array_equal(relu(x).data, [0.0, 0.0, 2.0])


def test_forward_determinism_bit_identical():
    rng = np.random.default_rng(0)
    xv = rng.standard_normal((8, 8)).astype(np.float32)
    wv = rng.standard_normal((8, 8)).astype(np.float32)

    def run():
        x = Tensor(xv, requires_grad=True)
        w = Tensor(wv, requires_grad=True)
        out = tensor_sum(relu(matmul(x, w)))
        out.backward()
        return out.data.copy(), x.grad.copy(), w.grad.copy()

    o1, gx1, gw1 = run()
    o2, gx2, gw2 = run()
    assert o1.tobytes() == o2.tobytes()
    assert gx1.tobytes() == gx2.tobytes()
    assert gw1.tobytes() == gw2.tobytes()
