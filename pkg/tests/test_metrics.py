import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bla.data import GeneratorSpec
from bla.metrics import accuracy, bayes_accuracy_estimate, bayes_accuracy_exact, evaluate, mse


def test_mse_examples():
    assert mse([1.0, 2.0], [1.0, 2.0]) == 0
    assert mse([0, 0], [1, 3]) == 5


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 200))
def test_mse_matches_naive_loop(seed, n):
    rng = np.random.default_rng(seed)
    p, t = rng.normal(size=n), rng.normal(size=n)
    naive = sum((a - b) ** 2 for a, b in zip(p, t)) / n
    assert mse(p, t) == pytest.approx(naive, rel=1e-12)


def test_accuracy_examples():
    assert accuracy([1.0, 1.0], [1, 1]) == 1.0
    assert accuracy([0.5], [1]) == 1.0
    assert accuracy([0.4999999], [1]) == 0.0


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**31 - 1), n=st.integers(1, 200), cutoff=st.floats(0, 1))
def test_accuracy_matches_count(seed, n, cutoff):
    rng = np.random.default_rng(seed)
    p, y = rng.uniform(size=n), rng.integers(0, 2, size=n)
    hits = sum(int((a >= cutoff) == (b == 1)) for a, b in zip(p, y))
    acc = accuracy(p, y, cutoff)
    assert acc == pytest.approx(hits / n)
    assert 0 <= acc <= 1


def test_metric_errors():
    for fn in (mse, accuracy):
        with pytest.raises(ValueError):
            fn([], [])
        with pytest.raises(ValueError):
            fn([1.0, 2.0], [1.0])


def test_evaluate_report():
    r = evaluate([0.7, 0.2], [1, 1], classification=True)
    assert (r.metric, r.value, r.n, r.cutoff) == ("accuracy", 0.5, 2, 0.5)
    r = evaluate([0.0], [2.0])
    assert (r.metric, r.value, r.n) == ("mse", 4.0, 1)


def test_bayes_exact():
    assert bayes_accuracy_exact("bernoulli_step") == pytest.approx(0.85, abs=1e-15)
    assert bayes_accuracy_exact(GeneratorSpec("bernoulli_cosine")) == pytest.approx(0.5 + 1 / np.pi)
    with pytest.raises(ValueError):
        bayes_accuracy_exact("f1")


def test_bayes_monte_carlo():
    rng = np.random.default_rng(0)
    assert abs(bayes_accuracy_estimate("bernoulli_step", 1_000_000, rng) - 0.85) <= 0.002
    assert abs(bayes_accuracy_estimate("bernoulli_cosine", 1_000_000, rng) - 0.8183) <= 0.003


def test_bayes_degenerate_and_errors():
    rng = np.random.default_rng(1)
    assert bayes_accuracy_estimate(lambda x: np.ones_like(x), 1000, rng) == 1.0
    with pytest.raises(ValueError):
        bayes_accuracy_estimate("f2", 10, rng)
