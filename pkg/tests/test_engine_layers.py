"""Layer containers: init statistics, parameter naming, weight loading."""

import numpy as np
import pytest

from trojanlab.engine import (
    Conv2d,
    EngineError,
    Flatten,
    Linear,
    MaxPool2,
    ReLU,
    Sequential,
    Tensor,
    Tanh,
)


def _mlp(rng):
    return Sequential(Linear(8, 16, rng), ReLU(), Linear(16, 4, rng))


def test_linear_init_bounds_follow_fan_in():
    rng = np.random.default_rng(0)
    layer = Linear(50, 20, rng)
    bound = np.sqrt(6.0 / 50)
    w = layer.weight.data
    assert w.shape == (50, 20)
    assert np.all(np.abs(w) <= bound)
    # uniform over [-bound, bound] has std bound/sqrt(3); loose factor-two check
    assert abs(w.std() - bound / np.sqrt(3)) < 0.5 * bound / np.sqrt(3)
    np.testing.assert_array_equal(layer.bias.data, np.zeros(20, dtype=np.float32))


def test_conv_init_bounds_follow_receptive_field_fan_in():
    rng = np.random.default_rng(0)
    layer = Conv2d(3, 8, 5, rng)
    bound = np.sqrt(6.0 / (3 * 5 * 5))
    assert layer.weight.shape == (8, 3, 5, 5)
    assert np.all(np.abs(layer.weight.data) <= bound)
    np.testing.assert_array_equal(layer.bias.data, np.zeros(8, dtype=np.float32))


def test_same_seed_same_weights_different_seed_different():
    a = _mlp(np.random.default_rng(7))
    b = _mlp(np.random.default_rng(7))
    c = _mlp(np.random.default_rng(8))
    for (_, pa), (_, pb) in zip(a.parameters(), b.parameters()):
        assert pa.data.tobytes() == pb.data.tobytes()
    assert any(
        pa.data.tobytes() != pc.data.tobytes()
        for (_, pa), (_, pc) in zip(a.parameters(), c.parameters())
    )


def test_parameter_names_are_index_prefixed():
    model = _mlp(np.random.default_rng(0))
    names = [n for n, _ in model.parameters()]
    assert names == ["0.weight", "0.bias", "2.weight", "2.bias"]


def test_forward_shapes_through_conv_stack():
    rng = np.random.default_rng(1)
    model = Sequential(
        Conv2d(1, 4, 3, rng), ReLU(), MaxPool2(),
        Conv2d(4, 8, 3, rng), ReLU(), MaxPool2(),
        Flatten(), Linear(8 * 5 * 5, 10, rng),
    )
    x = Tensor(np.zeros((2, 1, 28, 28), dtype=np.float32))
    out = model.forward(x)
    assert out.shape == (2, 10)


def test_all_parameters_receive_gradients():
    rng = np.random.default_rng(2)
    model = _mlp(rng)
    from trojanlab.engine import softmax_cross_entropy

    x = Tensor(rng.standard_normal((4, 8)).astype(np.float32))
    loss = softmax_cross_entropy(model.forward(x), np.array([0, 1, 2, 3]))
    loss.backward()
    for name, p in model.parameters():
        assert p.grad is not None, name


def test_load_parameters_round_trip():
    rng = np.random.default_rng(3)
    src = _mlp(rng)
    dst = _mlp(np.random.default_rng(4))
    dst.load_parameters({n: p.data for n, p in src.parameters()})
    for (_, ps), (_, pd) in zip(src.parameters(), dst.parameters()):
        assert ps.data.tobytes() == pd.data.tobytes()


def test_load_parameters_rejects_missing_name():
    model = _mlp(np.random.default_rng(0))
    state = {n: p.data for n, p in model.parameters()}
    del state["2.bias"]
    with pytest.raises(EngineError):
        model.load_parameters(state)


def test_load_parameters_rejects_extra_name():
    model = _mlp(np.random.default_rng(0))
    state = {n: p.data for n, p in model.parameters()}
    state["9.weight"] = np.zeros(3, dtype=np.float32)
    with pytest.raises(EngineError):
        model.load_parameters(state)


def test_load_parameters_rejects_wrong_shape():
    model = _mlp(np.random.default_rng(0))
    state = {n: p.data for n, p in model.parameters()}
    state["0.weight"] = np.zeros((3, 3), dtype=np.float32)
    with pytest.raises(EngineError):
        model.load_parameters(state)


def test_tanh_layer_applies_activation():
    out = Tanh().forward(Tensor(np.array([0.0, 100.0], dtype=np.float32)))
    np.testing.assert_allclose(out.data, [0.0, 1.0], atol=1e-6)
