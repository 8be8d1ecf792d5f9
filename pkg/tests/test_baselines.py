import numpy as np
import pytest

from bla.baselines import AdamState, GdConfig, adam_config, backprop_gradients, train_adam, train_gd
from bla.data import Dataset, generate
from bla.network import Network, init_glorot, init_network, leaky_relu, predict
from bla.seeding import stream


def loss(net, X, y):
    return np.mean((predict(net, X) - y) ** 2)


def finite_difference(net, X, y, h=1e-5):
    grads = []
    for l, w in enumerate(net.weights):
        g = np.zeros_like(w)
        for idx in np.ndindex(w.shape):
            ws = [x.copy() for x in net.weights]
            ws[l][idx] += h
            up = loss(Network(ws, net.activations), X, y)
            ws[l][idx] -= 2 * h
            down = loss(Network(ws, net.activations), X, y)
            g[idx] = (up - down) / (2 * h)
        grads.append(g)
    return grads


def rel_error(a, b):
    return np.max(np.abs(a - b)) / max(np.max(np.abs(b)), 1e-8)


@pytest.mark.parametrize("act", ["tanh", "identity", "relu", leaky_relu(0.1)])
@pytest.mark.parametrize("dims", [(2, 4, 1), (1, 3, 3, 1)])
def test_gradient_matches_finite_differences(act, dims):
    rng = np.random.default_rng(0)
    for _ in range(5):
        net = init_network(dims, rng=rng, hidden=act)
        X = rng.normal(size=(8, dims[0]))
        y = rng.normal(size=8)
        for g, fd in zip(backprop_gradients(net, X, y), finite_difference(net, X, y)):
            assert rel_error(g, fd) < 1e-4


def test_zero_error_gives_zero_gradient():
    rng = np.random.default_rng(1)
    net = init_network((2, 3, 1), rng=rng, hidden="identity")
    X = rng.normal(size=(10, 2))
    for g in backprop_gradients(net, X, predict(net, X)):
        np.testing.assert_allclose(g, 0, atol=1e-14)


def test_linear_single_datum_closed_form():
    # y_hat = v*(w*x - a) - c, loss (y_hat - y)^2
    a, w, c, v, x, y = 0.3, 1.5, -0.2, 2.0, 0.7, 1.0
    net = Network([np.array([[a, w]]), np.array([[c, v]])], ["identity", "identity"])
    z = w * x - a
    e = 2 * (v * z - c - y)
    g1, g2 = backprop_gradients(net, [[x]], [y])
    np.testing.assert_allclose(g1, [[-e * v, e * v * x]])
    np.testing.assert_allclose(g2, [[-e, e * z]])


def test_gradient_dimension_mismatch():
    net = init_network((2, 3, 1), rng=0)
    with pytest.raises(ValueError):
        backprop_gradients(net, np.ones((4, 3)), np.ones(4))


def small_data(tag="f1", n=300, seed=0):
    full = generate(tag, n + 100, np.random.default_rng(seed))
    return full.subset(np.arange(n)), full.subset(np.arange(n, n + 100))


def test_gd_zero_lr_freezes_weights():
    tr, va = small_data()
    net, hist = train_gd(tr, va, 5, GdConfig(lr=0.0, hidden=(5,), seed=3, init="normal"))
    ref = init_network((1, 5, 1), 0.5, stream(3, "init"))
    for a, b in zip(net.weights, ref.weights):
        np.testing.assert_array_equal(a, b)
    assert len(hist.records) == 5 and len(set(hist.metrics)) == 1


def test_gd_converges_on_least_squares():
    rng = np.random.default_rng(2)
    X = rng.uniform(-1, 1, size=(200, 1))
    y = 3 * X[:, 0] - 0.5 + 0.1 * rng.normal(size=200)
    data = Dataset(X, y)
    net, hist = train_gd(data, data, 10_000,
                         GdConfig(lr=0.05, hidden=(1,), hidden_activation="identity"))
    A = np.column_stack([X[:, 0], np.ones(200)])
    coef = np.linalg.lstsq(A, y, rcond=None)[0]
    best = np.mean((A @ coef - y) ** 2)
    assert hist.metrics[-1] - best < 1e-4


def test_adam_zero_gradient_keeps_weights():
    st = AdamState()
    w = [np.ones((2, 3))]
    out = st.step(w, [np.zeros((2, 3))])
    np.testing.assert_array_equal(out[0], w[0])
    assert st.t == 1 and st.m[0].shape == (2, 3)


def test_adam_step_bound():
    rng = np.random.default_rng(3)
    st = AdamState(lr=0.01)
    w = [rng.normal(size=(3, 4))]
    for _ in range(50):
        g = [rng.normal(size=(3, 4)) * 10 ** rng.uniform(-3, 3)]
        new = st.step(w, g)
        assert np.max(np.abs(new[0] - w[0])) <= st.lr / (1 - st.beta1) + 1e-12
        w = new


def test_adam_first_step_is_lr_sign():
    st = AdamState(lr=0.001)
    g = np.array([[2.0, -0.5, 1e-3]])
    out = st.step([np.zeros((1, 3))], [g])
    np.testing.assert_allclose(out[0], -0.001 * np.sign(g), rtol=1e-4)


def test_adam_deterministic():
    tr, va = small_data("f2")
    cfg = adam_config(hidden=(6,), seed=4)
    _, h1 = train_adam(tr, va, 3, cfg)
    _, h2 = train_adam(tr, va, 3, cfg)
    assert h1.metrics == h2.metrics
    assert cfg.batch_size == 200 and cfg.name == "ADAM"


def test_adam_reduces_loss():
    tr, va = small_data("f3", n=1000)
    _, h = train_adam(tr, va, 30, adam_config(hidden=(10,), lr=0.01))
    assert h.metrics[-1] < h.metrics[0]


def test_baselines_classification_metric():
    tr, va = small_data("bernoulli_step")
    _, h = train_gd(tr, va, 2, GdConfig(hidden=(4,)))
    assert h.metric_name == "accuracy"
    assert all(0 <= m <= 1 for m in h.metrics)


def test_non_finite_aborts():
    tr, va = small_data()
    with pytest.raises(FloatingPointError):
        train_gd(tr, va, 200, GdConfig(lr=10.0, hidden=(5,), hidden_activation="identity"))


def test_gd_config_validation():
    with pytest.raises(ValueError):
        GdConfig(lr=-1)
    with pytest.raises(ValueError):
        GdConfig(init="zeros")


def test_glorot_init_bounds():
    net = init_glorot((3, 100, 1), rng=0)
    assert np.abs(net.weights[0]).max() <= np.sqrt(6 / 103)
    assert np.abs(net.weights[1]).max() <= np.sqrt(6 / 101)
    assert net.weights[0].std() == pytest.approx(np.sqrt(6 / 103) / np.sqrt(3), rel=0.1)
    tr, va = small_data()
    net, _ = train_gd(tr, va, 1, GdConfig(lr=0.0, hidden=(5,), seed=2))
    ref = init_glorot((1, 5, 1), stream(2, "init"))
    np.testing.assert_array_equal(net.weights[0], ref.weights[0])
