#!/usr/bin/env python
# -*- coding: utf-8 -*-

import numpy as np
import pytest

from core.errors import NumericError, ShapeError
from core.nncore import Gradients, Mlp, Optimizer, apply_gradients, polyak_update


def numeric_gradient(net, x, upstream, param, eps=1e-6):
    """Central differences of sum(upstream * net(x)) w.r.t. one parameter array"""
    grad = np.zeros_like(param)
    it = np.nditer(param, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        saved = param[idx]
        param[idx] = saved + eps
        plus = np.sum(upstream * net.forward(x))
        param[idx] = saved - eps
        minus = np.sum(upstream * net.forward(x))
        param[idx] = saved
        grad[idx] = (plus - minus) / (2 * eps)
    return grad


def relative_error(a, b):
    return np.max(np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b)))


@pytest.mark.parametrize("output_activation", ["identity", "tanh"])
def test_gradients_match_finite_differences(output_activation):
    rng = np.random.default_rng(42)
    for trial in range(50):
        sizes = [int(rng.integers(1, 5))] + [int(rng.integers(2, 6)) for _ in range(rng.integers(1, 3))]
        sizes.append(int(rng.integers(1, 4)))
        net = Mlp(sizes, output_activation=output_activation, rng=rng)
        x = rng.normal(size=(3, sizes[0]))
        upstream = rng.normal(size=(3, sizes[-1]))
        grads = net.backward(x, upstream)
        for analytic, param in zip(grads.weights + grads.biases, net.parameters()):
            numeric = numeric_gradient(net, x, upstream, param)
            assert relative_error(analytic, numeric) < 1e-4 or np.allclose(analytic, numeric, atol=1e-7), (
                f"trial {trial}"
            )


def test_input_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    net = Mlp([4, 8, 2], output_activation="tanh", rng=rng)
    x = rng.normal(size=4)
    upstream = rng.normal(size=2)
    analytic = net.backward(x, upstream).inputs
    numeric = np.zeros(4)
    for i in range(4):
        dx = np.zeros(4)
        dx[i] = 1e-6
        numeric[i] = (np.sum(upstream * net.forward(x + dx)) - np.sum(upstream * net.forward(x - dx))) / 2e-6
    np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-7)


def test_forward_shapes_and_tanh_bound():
    net = Mlp([3, 5, 2], output_activation="tanh", rng=np.random.default_rng(0))
    assert net.forward(np.zeros(3)).shape == (2,)
    out = net.forward(np.random.default_rng(1).normal(size=(7, 3)) * 100)
    assert out.shape == (7, 2)
    assert np.all(np.abs(out) <= 1.0)


def test_forward_rejects_wrong_input_dimension():
    net = Mlp([3, 4, 1])
    with pytest.raises(ShapeError):
        net.forward(np.zeros(4))


def test_layer_sizes_and_activations_are_validated():
    with pytest.raises(ShapeError):
        Mlp([3])
    with pytest.raises(ValueError):
        Mlp([2, 2], output_activation="sigmoid")


def test_zero_input_network():
    net = Mlp([0, 4, 2], output_activation="tanh")
    assert net.forward(np.zeros(0)).shape == (2,)


def test_adam_reduces_quadratic_loss():
    rng = np.random.default_rng(0)
    net = Mlp([2, 16, 1], rng=rng)
    x = rng.normal(size=(64, 2))
    y = (x[:, :1] - 2 * x[:, 1:]) * 0.5
    opt = Optimizer(1e-2)
    first = None
    for _ in range(300):
        error = net.forward(x) - y
        loss = float(np.mean(error**2))
        first = loss if first is None else first
        opt.step(net, net.backward(x, 2 * error / error.size))
    assert loss < 0.1 * first


def test_sgd_step_moves_against_gradient():
    net = Mlp.zeros([1, 1])
    grads = Gradients(weights=[np.array([[1.0]])], biases=[np.array([-2.0])])
    Optimizer(0.5, variant="sgd").step(net, grads)
    assert net.weights[0][0, 0] == pytest.approx(-0.5)
    assert net.biases[0][0] == pytest.approx(1.0)


def test_optimizer_rejects_non_finite_gradients():
    net = Mlp([1, 1])
    grads = Gradients(weights=[np.array([[np.nan]])], biases=[np.array([0.0])])
    with pytest.raises(NumericError):
        Optimizer().step(net, grads)


def test_polyak_update_interpolates():
    target = Mlp.zeros([2, 2])
    source = Mlp.zeros([2, 2])
    source.weights[0].fill(1.0)
    polyak_update(target, source, 0.995)
    np.testing.assert_allclose(target.weights[0], 0.005)
    polyak_update(target, source, 1.0)
    np.testing.assert_allclose(target.weights[0], 0.005)
    polyak_update(target, source, 0.0)
    np.testing.assert_allclose(target.weights[0], 1.0)


def test_polyak_update_requires_same_architecture():
    with pytest.raises(ShapeError):
        polyak_update(Mlp([2, 2]), Mlp([2, 3]), 0.5)


def test_copy_is_independent():
    net = Mlp([2, 3, 1], rng=np.random.default_rng(0))
    twin = net.copy()
    twin.weights[0] += 1.0
    assert not np.allclose(net.weights[0], twin.weights[0])


def test_serialization_preserves_outputs(tmp_path):
    net = Mlp([3, 4, 2], output_activation="tanh", rng=np.random.default_rng(5))
    net.save(tmp_path / "net.json")
    restored = Mlp.load(tmp_path / "net.json")
    x = np.random.default_rng(6).normal(size=(5, 3))
    np.testing.assert_array_equal(net.forward(x), restored.forward(x))
    assert restored.output_activation == "tanh"


def test_identity_layer_and_zero_network():
    net = Mlp.zeros([2, 2])
    net.weights[0][:] = np.eye(2)
    np.testing.assert_array_equal(net.forward(np.array([1.0, 2.0])), [1.0, 2.0])
    zero = Mlp.zeros([3, 4, 2], rng=np.random.default_rng(0))
    np.testing.assert_array_equal(zero.forward(np.array([5.0, -1.0, 2.0])), [0.0, 0.0])


def test_forward_matches_scalar_recomputation():
    net = Mlp([2, 4, 2], rng=np.random.default_rng(9))
    x = [0.3, -1.2]
    hidden = []
    for k in range(4):
        z = net.biases[0][k] + sum(net.weights[0][k, i] * x[i] for i in range(2))
        hidden.append(max(z, 0.0))
    expected = [net.biases[1][o] + sum(net.weights[1][o, k] * hidden[k] for k in range(4)) for o in range(2)]
    np.testing.assert_allclose(net.forward(np.array(x)), expected, rtol=1e-12)


def test_linear_weight_gradient_and_relu_at_zero():
    net = Mlp.zeros([1, 1])
    net.weights[0][0, 0] = 0.7
    grads = net.backward(np.array([3.0]), np.array([1.0]))
    assert grads.weights[0][0, 0] == pytest.approx(3.0)
    # Hidden pre-activation exactly zero: no gradient flows through it
    relu = Mlp.zeros([1, 1, 1])
    relu.weights[1][0, 0] = 1.0
    grads = relu.backward(np.array([2.0]), np.array([1.0]))
    assert grads.weights[0][0, 0] == 0.0
    assert grads.biases[0][0] == 0.0


def test_sgd_example_and_zero_gradients():
    net = Mlp.zeros([1, 1])
    net.weights[0][0, 0] = 1.0
    grads = Gradients(weights=[np.array([[2.0]])], biases=[np.array([0.0])])
    apply_gradients(net, grads, Optimizer(0.1, variant="sgd"))
    assert net.weights[0][0, 0] == pytest.approx(0.8)
    before = [p.copy() for p in net.parameters()]
    zeros = Gradients(weights=[np.zeros((1, 1))], biases=[np.zeros(1)])
    apply_gradients(net, zeros, Optimizer(0.1, variant="sgd"))
    apply_gradients(net, zeros, Optimizer(0.1))
    for a, b in zip(before, net.parameters()):
        np.testing.assert_array_equal(a, b)


def test_adam_first_step_moves_by_learning_rate():
    net = Mlp.zeros([1, 1])
    grads = Gradients(weights=[np.array([[0.37]])], biases=[np.array([-5.0])])
    Optimizer(0.01).step(net, grads)
    assert net.weights[0][0, 0] == pytest.approx(-0.01, rel=1e-5)
    assert net.biases[0][0] == pytest.approx(0.01, rel=1e-5)


def test_polyak_example_value():
    target = Mlp.zeros([1, 1])
    target.weights[0].fill(1.0)
    polyak_update(target, Mlp.zeros([1, 1]), 0.995)
    assert target.weights[0][0, 0] == pytest.approx(0.995)


def test_same_seed_gives_identical_training():
    def train(seed):
        rng = np.random.default_rng(seed)
        net = Mlp([2, 8, 1], rng=rng)
        opt = Optimizer(1e-2)
        x = rng.normal(size=(16, 2))
        for _ in range(20):
            error = net.forward(x) - 1.0
            opt.step(net, net.backward(x, error / error.size))
        return net

    first, second = train(4), train(4)
    for a, b in zip(first.parameters(), second.parameters()):
        np.testing.assert_array_equal(a, b)
