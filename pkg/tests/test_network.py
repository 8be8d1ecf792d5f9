import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bla.network import (
    IDENTITY,
    RELU,
    TANH,
    Activation,
    Network,
    augment,
    fold_scaling,
    forward,
    forward_trace,
    init_network,
    leaky_relu,
    predict,
    trace_batch,
)


def test_activation_values_and_inverse():
    z = np.array([-2.0, -0.5, 0.0, 0.5, 2.0])
    np.testing.assert_array_equal(IDENTITY(z), z)
    np.testing.assert_array_equal(IDENTITY.inverse(z), z)
    np.testing.assert_allclose(TANH.inverse(TANH(z)), z, rtol=1e-12)
    np.testing.assert_array_equal(RELU(z), [0, 0, 0, 0.5, 2])
    np.testing.assert_allclose(leaky_relu(0.1)(z), [-0.2, -0.05, 0, 0.5, 2])
    assert IDENTITY.invertible and TANH.invertible
    assert not RELU.invertible and not leaky_relu().invertible


def test_activation_inverse_errors():
    with pytest.raises(ValueError):
        TANH.inverse(1.0)
    with pytest.raises(ValueError):
        RELU.inverse(0.3)
    with pytest.raises(ValueError):
        leaky_relu().inverse(0.3)
    with pytest.raises(ValueError):
        Activation("sigmoid")


def test_activation_parse():
    assert Activation.parse("tanh") == TANH
    assert Activation.parse("LeakyReLU") == leaky_relu(0.01)
    assert Activation.parse("leaky_relu:0.2") == leaky_relu(0.2)
    assert Activation.parse({"name": "relu"}) == RELU
    assert Activation.parse(leaky_relu(0.3).to_dict()) == leaky_relu(0.3)


def test_augment():
    np.testing.assert_array_equal(augment([2.0, 3.0]), [-1, 2, 3])
    np.testing.assert_array_equal(augment(np.ones((2, 1))), [[-1, 1], [-1, 1]])


def test_init_shapes():
    net = init_network((1, 100, 1), rng=0)
    assert [w.shape for w in net.weights] == [(100, 2), (1, 101)]
    assert net.widths == (1, 100, 1) and net.n_hidden == 1
    net2 = init_network((3, 20, 20, 1), rng=0)
    assert [w.shape for w in net2.weights] == [(20, 4), (20, 21), (1, 21)]


def test_init_deterministic():
    a, b = init_network((2, 5, 1), rng=42), init_network((2, 5, 1), rng=42)
    for wa, wb in zip(a.weights, b.weights):
        np.testing.assert_array_equal(wa, wb)


def test_init_moments():
    net = init_network((1, 5000, 1), variance=0.5, rng=1)
    w = np.concatenate([x.ravel() for x in net.weights])
    assert len(w) >= 10_000
    assert abs(w.mean()) < 0.05 * np.sqrt(0.5) * 3
    assert abs(w.var() - 0.5) < 0.05 * 0.5


def test_init_errors():
    with pytest.raises(ValueError):
        init_network((1, 10, 1), variance=0)
    with pytest.raises(ValueError):
        init_network((1, 1))
    with pytest.raises(ValueError):
        init_network((1, 0, 1))


def test_network_validation():
    with pytest.raises(ValueError):
        Network([np.zeros((3, 2)), np.zeros((1, 3))], ["tanh", "identity"])  # width chain 3 vs 2
    with pytest.raises(ValueError):
        Network([np.zeros((3, 2)), np.zeros((2, 4))], ["tanh", "identity"])  # two outputs
    with pytest.raises(ValueError):
        Network([np.zeros((3, 2)), np.zeros((1, 4))], ["tanh", "relu"])  # non-invertible output
    with pytest.raises(ValueError):
        Network([np.zeros((1, 2))], ["identity"])


def test_zero_weights():
    net = Network([np.zeros((4, 2)), np.zeros((1, 5))], [TANH, IDENTITY])
    p = forward_trace(net, 0.7)
    np.testing.assert_array_equal(p.z1_hat, 0)
    np.testing.assert_array_equal(p.h_hat, 0)
    assert p.y_hat == 0


def test_hand_evaluation():
    net = Network([np.array([[0.0, 2.0]]), np.array([[0.0, 1.0]])], ["tanh", "identity"])
    p = forward_trace(net, 0.5)
    assert p.z1_hat[0] == pytest.approx(1.0)
    assert p.h_hat[0] == pytest.approx(0.76159, abs=1e-5)
    assert p.y_hat == pytest.approx(0.76159, abs=1e-5)


def test_bias_column_uses_minus_one():
    net = Network([np.array([[3.0, 1.0]]), np.array([[-2.0, 1.0]])], ["identity", "identity"])
    # z1 = x - 3, y = z1 + 2
    assert forward(net, 10.0) == pytest.approx(9.0)


def test_trace_matches_forward_bitwise():
    rng = np.random.default_rng(0)
    for _ in range(100):
        d = int(rng.integers(1, 4))
        hidden = tuple(int(h) for h in rng.integers(1, 8, size=int(rng.integers(1, 3))))
        act = ["tanh", "relu", "leaky_relu", "identity"][int(rng.integers(4))]
        net = init_network((d,) + hidden + (1,), rng=rng, hidden=act)
        x = rng.normal(size=d)
        p = forward_trace(net, x)
        assert p.y_hat == forward(net, x)
        np.testing.assert_array_equal(p.h_hat, net.activations[0](p.z1_hat))


def test_batch_trace_consistent_with_single():
    rng = np.random.default_rng(1)
    net = init_network((2, 6, 4, 1), rng=rng)
    X = rng.normal(size=(10, 2))
    tr = trace_batch(net, X)
    for k in range(10):
        p, q = tr.particle(k), forward_trace(net, X[k])
        np.testing.assert_allclose(p.z1_hat, q.z1_hat, rtol=1e-14)
        np.testing.assert_allclose(p.h2_hat, q.h2_hat, rtol=1e-14)
        np.testing.assert_allclose(p.z3_hat, q.z3_hat, rtol=1e-14)
        assert p.y_hat == pytest.approx(q.y_hat, rel=1e-14)
    np.testing.assert_allclose(predict(net, X), tr.y_hat)


def test_identity_net_is_affine():
    rng = np.random.default_rng(2)
    W1, b1 = rng.normal(size=(4, 3)), rng.normal(size=4)
    W2, b2 = rng.normal(size=(1, 4)), rng.normal(size=1)
    net = Network([np.column_stack([b1, W1]), np.column_stack([b2, W2])], ["identity", "identity"])
    X = rng.normal(size=(20, 3))
    expected = ((X @ W1.T - b1) @ W2.T - b2)[:, 0]
    np.testing.assert_allclose(predict(net, X), expected, rtol=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_explicit_bias_round_trip(seed):
    rng = np.random.default_rng(seed)
    net = init_network((2, 5, 1), rng=rng)
    x = rng.normal(size=2)
    w1, beta1 = net.weights[0][:, 1:], net.weights[0][:, 0]
    w2, beta2 = net.weights[1][:, 1:], net.weights[1][:, 0]
    y = (w2 @ np.tanh(w1 @ x - beta1) - beta2)[0]
    assert abs(forward(net, x) - y) <= 1e-14 * max(1, abs(y))


@settings(max_examples=50, deadline=None)
@given(w=st.floats(0.01, 5), v=st.floats(0.01, 5), b=st.floats(-3, 3),
       x1=st.floats(-3, 3), x2=st.floats(-3, 3))
def test_monotone_positive_path(w, v, b, x1, x2):
    net = Network([np.array([[b, w]]), np.array([[0.0, v]])], ["tanh", "identity"])
    lo, hi = sorted((x1, x2))
    assert forward(net, lo) <= forward(net, hi)


def test_dimension_mismatch():
    net = init_network((2, 3, 1), rng=0)
    with pytest.raises(ValueError):
        forward(net, [1.0, 2.0, 3.0])
    with pytest.raises(ValueError):
        predict(net, np.ones((4, 3)))


def test_save_load_round_trip(tmp_path):
    net = init_network((3, 4, 2, 1), rng=3, hidden="leaky_relu:0.05")
    path = tmp_path / "net.json"
    net.save(path)
    doc = json.loads(path.read_text())
    assert doc["widths"] == [3, 4, 2, 1]
    back = Network.load(path)
    for a, b in zip(net.weights, back.weights):
        np.testing.assert_array_equal(a, b)
    assert back.activations == net.activations


def test_copy_is_independent():
    net = init_network((1, 3, 1), rng=0)
    c = net.copy()
    c.weights[0][0, 0] += 1
    assert net.weights[0][0, 0] != c.weights[0][0, 0]


@pytest.mark.parametrize("n_hidden", [1, 2])
def test_fold_scaling_equivalence(n_hidden):
    rng = np.random.default_rng(4)
    dims = (3,) + (5,) * n_hidden + (1,)
    net = init_network(dims, rng=rng)
    xo, xs = rng.normal(size=3), rng.uniform(0.5, 2, size=3)
    yo, ys = 1.5, 3.0
    X = rng.normal(size=(20, 3))
    expected = predict(net, (X - xo) / xs) * ys + yo
    np.testing.assert_allclose(predict(fold_scaling(net, xo, xs, yo, ys), X), expected,
                               rtol=1e-10, atol=1e-12)


def test_fold_scaling_needs_identity_output():
    net = init_network((1, 3, 1), rng=0, output="tanh")
    fold_scaling(net, 0.0, 2.0)  # inputs only: fine
    with pytest.raises(ValueError):
        fold_scaling(net, 0.0, 2.0, 1.0, 2.0)
