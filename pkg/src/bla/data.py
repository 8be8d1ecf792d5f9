"""Synthetic regression and classification generators."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .network import Network, predict

REGRESSION = ("f1", "f2", "f3", "multi_input", "stochastic_net")
CLASSIFICATION = ("bernoulli_step", "bernoulli_cosine")

DOMAINS = {
    "f1": [(-3.0, 3.0)],
    "f2": [(-3.0, 3.0)],
    "f3": [(-1.0, 4.0)],
    "multi_input": [(-5.0, 5.0), (-2.0, 2.0), (0.0, 4.0)],
    "stochastic_net": [(-5.0, 5.0)],
    "bernoulli_step": [(0.0, 1.0)],
    "bernoulli_cosine": [(0.0, 2.0 * np.pi)],
}


def f1(x):
    return x**3 - 2 * x**2 + 5 * x - 1


def f2(x):
    return np.sin(x**2) - 0.03 * x**5


def f3(x):
    return -((x - 2) ** 3) * (x + 1) ** 2 * (x - 4) / 8


def multi_input(X):
    X = np.atleast_2d(X)
    return 2 * X[:, 0] ** 2 * X[:, 1] - 6 * X[:, 0] * X[:, 2]


_FUNCTIONS = {"f1": f1, "f2": f2, "f3": f3}


def step_probability(x):
    x = np.asarray(x, dtype=float)
    return np.select([x < 0.3, x < 0.6, x < 0.8], [0.05, 0.25, 0.75], 0.95)


def cosine_probability(x):
    return (np.cos(x) + 1.0) / 2.0


PROBABILITY = {"bernoulli_step": step_probability, "bernoulli_cosine": cosine_probability}


@dataclass
class Dataset:
    """Inputs ``x`` of shape ``(n, d)`` and scalar outputs or 0/1 labels ``y``."""

    x: np.ndarray
    y: np.ndarray
    name: str = ""
    domain: list = field(default_factory=list)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim == 1:
            self.x = self.x[:, None]
        self.y = np.asarray(self.y, dtype=float)
        if len(self.x) != len(self.y):
            raise ValueError("x and y lengths differ")

    def __len__(self):
        return len(self.y)

    def subset(self, idx):
        return Dataset(self.x[idx], self.y[idx], self.name, self.domain)

    @property
    def is_classification(self):
        return self.name in CLASSIFICATION

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{j + 1}" for j in range(self.x.shape[1])] + ["y"])
            for xi, yi in zip(self.x, self.y):
                w.writerow([repr(float(v)) for v in xi] + [repr(float(yi))])

    @classmethod
    def from_csv(cls, path, name=""):
        raw = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(raw[:, :-1], raw[:, -1], name)


@dataclass
class GeneratorSpec:
    tag: str
    domain: list = None

    def __post_init__(self):
        self.tag = self.tag.lower()
        if self.tag not in DOMAINS:
            raise ValueError(f"unknown generator {self.tag!r}; choose from {sorted(DOMAINS)}")
        if self.domain is None:
            self.domain = list(DOMAINS[self.tag])

    @property
    def is_classification(self):
        return self.tag in CLASSIFICATION


def _uniform(domain, n, rng):
    lo = np.array([d[0] for d in domain])
    hi = np.array([d[1] for d in domain])
    return rng.uniform(lo, hi, size=(n, len(domain)))


def gen_regression(spec, n, rng):
    """``n`` pairs ``(x, f(x))`` with x uniform over the generator's domain."""
    if isinstance(spec, str):
        spec = GeneratorSpec(spec)
    if n < 1:
        raise ValueError("n must be >= 1")
    if spec.tag == "multi_input":
        X = _uniform(spec.domain, n, rng)
        return Dataset(X, multi_input(X), spec.tag, spec.domain)
    if spec.tag not in _FUNCTIONS:
        raise ValueError(f"{spec.tag!r} is not a closed-form regression target")
    X = _uniform(spec.domain, n, rng)
    return Dataset(X, _FUNCTIONS[spec.tag](X[:, 0]), spec.tag, spec.domain)


def gen_stochastic_net_target(rng, width=100, first=(5.0, 3.0), second=(0.0, 0.5),
                              domain=(-5.0, 5.0)):
    """Random 1-width-1 tanh/identity target network and a sampler for it.

    Layer-one weights and biases are N(5, 3), layer-two N(0, 0.5); the pairs
    are (mean, variance). The sampler draws x uniform on ``domain``.
    """
    w1 = rng.normal(first[0], np.sqrt(first[1]), size=(width, 2))
    w2 = rng.normal(second[0], np.sqrt(second[1]), size=(1, width + 1))
    target = Network([w1, w2], ["tanh", "identity"])

    def sampler(n, sample_rng):
        X = sample_rng.uniform(domain[0], domain[1], size=(n, 1))
        return Dataset(X, predict(target, X), "stochastic_net", [tuple(domain)])

    return target, sampler


def gen_bernoulli_step(n, rng):
    X = rng.uniform(0.0, 1.0, size=(n, 1))
    y = (rng.random(n) < step_probability(X[:, 0])).astype(float)
    return Dataset(X, y, "bernoulli_step", DOMAINS["bernoulli_step"])


def gen_bernoulli_cosine(n, rng):
    X = rng.uniform(0.0, 2.0 * np.pi, size=(n, 1))
    y = (rng.random(n) < cosine_probability(X[:, 0])).astype(float)
    return Dataset(X, y, "bernoulli_cosine", DOMAINS["bernoulli_cosine"])


def generate(spec, n, rng, target_rng=None):
    """Dispatch on the generator tag. ``target_rng`` seeds the stochastic target network."""
    if isinstance(spec, str):
        spec = GeneratorSpec(spec)
    if spec.tag == "bernoulli_step":
        return gen_bernoulli_step(n, rng)
    if spec.tag == "bernoulli_cosine":
        return gen_bernoulli_cosine(n, rng)
    if spec.tag == "stochastic_net":
        _, sampler = gen_stochastic_net_target(target_rng if target_rng is not None else rng)
        return sampler(n, rng)
    return gen_regression(spec, n, rng)


def split_and_shuffle(dataset, n_train=6000, n_val=1000, rng=None):
    """Disjoint training and validation sets of exact sizes.

    The points are i.i.d., so a random permutation split keeps both sets
    independent draws from the same law.
    """
    if len(dataset) < n_train + n_val:
        raise ValueError(f"need {n_train + n_val} points, dataset has {len(dataset)}")
    rng = np.random.default_rng(rng)
    perm = rng.permutation(len(dataset))
    return dataset.subset(perm[:n_train]), dataset.subset(perm[n_train:n_train + n_val])
