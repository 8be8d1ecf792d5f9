"""Shallow fully-connected networks with the bias folded into column 0.

Every layer computes ``z = W @ [-1, a]`` so ``W[:, 0]`` holds the bias that
is subtracted and ``W[:, 1:]`` the connection weights. Forward passes can be
traced to expose every pre-activation and activation; these traces are the
bootstrap particle proposals.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

_INVERTIBLE = {"identity", "tanh"}


@dataclass(frozen=True)
class Activation:
    name: str
    slope: float = 0.01  # only read by leaky_relu

    def __post_init__(self):
        if self.name not in ("identity", "tanh", "relu", "leaky_relu"):
            raise ValueError(f"unknown activation {self.name!r}")

    def __call__(self, z):
        if self.name == "identity":
            return z
        if self.name == "tanh":
            return np.tanh(z)
        if self.name == "relu":
            return np.maximum(z, 0.0)
        return np.where(z > 0.0, z, self.slope * z)

    def derivative(self, z):
        """Elementwise derivative; the kink of (leaky) ReLU takes the left slope."""
        z = np.asarray(z, dtype=float)
        if self.name == "identity":
            return np.ones_like(z)
        if self.name == "tanh":
            return 1.0 - np.tanh(z) ** 2
        if self.name == "relu":
            return (z > 0.0).astype(float)
        return np.where(z > 0.0, 1.0, self.slope)

    @property
    def invertible(self):
        return self.name in _INVERTIBLE

    def inverse(self, y):
        y = np.asarray(y, dtype=float)
        if self.name == "identity":
            return y
        if self.name == "tanh":
            if np.any(np.abs(y) >= 1.0):
                raise ValueError("tanh output targets must lie strictly inside (-1, 1)")
            return np.arctanh(y)
        raise ValueError(f"{self.name} is not inverted; supply pre-activations instead")

    def to_dict(self):
        d = {"name": self.name}
        if self.name == "leaky_relu":
            d["slope"] = self.slope
        return d

    @classmethod
    def parse(cls, spec):
        """Build from ``"tanh"``, ``"leaky_relu:0.05"`` or a dict."""
        if isinstance(spec, Activation):
            return spec
        if isinstance(spec, dict):
            return cls(spec["name"], float(spec.get("slope", 0.01)))
        name, _, slope = str(spec).strip().lower().partition(":")
        name = name.replace("-", "_")
        if name == "leakyrelu":
            name = "leaky_relu"
        return cls(name, float(slope) if slope else 0.01)


IDENTITY = Activation("identity")
TANH = Activation("tanh")
RELU = Activation("relu")


def leaky_relu(slope=0.01):
    return Activation("leaky_relu", slope)


def augment(a):
    """Prepend the constant -1 bias component to each row (or to a vector)."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        return np.concatenate(([-1.0], a))
    return np.hstack([np.full((a.shape[0], 1), -1.0), a])


@dataclass
class Network:
    """Weights ``W_l`` of shape ``(out, in + 1)`` and one activation per layer."""

    weights: list
    activations: list

    def __post_init__(self):
        self.weights = [np.asarray(w, dtype=float) for w in self.weights]
        self.activations = [Activation.parse(a) for a in self.activations]
        if len(self.weights) not in (2, 3):
            raise ValueError("only one or two hidden layers are supported")
        if len(self.activations) != len(self.weights):
            raise ValueError("need one activation per weight layer")
        for prev, w in zip(self.weights, self.weights[1:]):
            if w.shape[1] != prev.shape[0] + 1:
                raise ValueError(f"layer shapes {prev.shape} -> {w.shape} do not chain")
        if self.weights[-1].shape[0] != 1:
            raise ValueError("output layer must have a single unit")
        if not self.activations[-1].invertible:
            raise ValueError("output activation must be invertible (identity or tanh)")

    @property
    def widths(self):
        return (self.weights[0].shape[1] - 1,) + tuple(w.shape[0] for w in self.weights)

    @property
    def input_dim(self):
        return self.weights[0].shape[1] - 1

    @property
    def n_hidden(self):
        return len(self.weights) - 1

    def copy(self):
        return Network([w.copy() for w in self.weights], list(self.activations))

    def to_dict(self):
        return {
            "widths": list(self.widths),
            "activations": [a.to_dict() for a in self.activations],
            "weights": [w.tolist() for w in self.weights],
        }

    @classmethod
    def from_dict(cls, d):
        net = cls(d["weights"], d["activations"])
        if list(net.widths) != list(d["widths"]):
            raise ValueError(f"widths {d['widths']} disagree with weight shapes {net.widths}")
        return net

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path):
        return cls.from_dict(json.loads(Path(path).read_text()))


def init_network(dims, variance=0.5, rng=None, hidden="tanh", output="identity"):
    """Random network with every weight and bias i.i.d. N(0, variance).

    ``dims`` lists the layer widths from input to output, e.g. ``(1, 100, 1)``.
    """
    if variance <= 0:
        raise ValueError("variance must be positive")
    dims = tuple(int(d) for d in dims)
    if len(dims) not in (3, 4) or min(dims) < 1:
        raise ValueError(f"bad layer widths {dims}")
    rng = np.random.default_rng(rng)
    sd = np.sqrt(variance)
    weights = [rng.normal(0.0, sd, size=(dims[i + 1], dims[i] + 1)) for i in range(len(dims) - 1)]
    hidden = Activation.parse(hidden)
    return Network(weights, [hidden] * (len(dims) - 2) + [Activation.parse(output)])


def init_glorot(dims, rng=None, hidden="tanh", output="identity"):
    """Random network with weights and biases uniform on +-sqrt(6 / (fan_in + fan_out)).

    The usual default of off-the-shelf MLP toolkits; used by the gradient baselines.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) not in (3, 4) or min(dims) < 1:
        raise ValueError(f"bad layer widths {dims}")
    rng = np.random.default_rng(rng)
    weights = []
    for i in range(len(dims) - 1):
        bound = np.sqrt(6.0 / (dims[i] + dims[i + 1]))
        weights.append(rng.uniform(-bound, bound, size=(dims[i + 1], dims[i] + 1)))
    hidden = Activation.parse(hidden)
    return Network(weights, [hidden] * (len(dims) - 2) + [Activation.parse(output)])


@dataclass
class Particle:
    """Traced forward pass of one input.

    With two hidden layers ``h_hat``/``z2_hat`` belong to the first/second
    hidden layer, ``h2_hat`` is the second hidden activation and ``z3_hat``
    the output pre-activation.
    """

    x_hat: np.ndarray
    z1_hat: np.ndarray
    h_hat: np.ndarray
    z2_hat: np.ndarray
    y_hat: float
    h2_hat: np.ndarray = field(default=None)
    z3_hat: np.ndarray = field(default=None)


@dataclass
class BatchTrace:
    """Row-wise traces of a whole batch: ``zs[l]`` and ``hs[l]`` per layer."""

    x: np.ndarray
    zs: list
    hs: list

    @property
    def y_hat(self):
        return self.hs[-1][:, 0]

    def particle(self, k):
        z, h = self.zs, self.hs
        if len(z) == 2:
            return Particle(self.x[k], z[0][k], h[0][k], z[1][k], float(h[1][k, 0]))
        return Particle(self.x[k], z[0][k], h[0][k], z[1][k], float(h[2][k, 0]), h[1][k], z[2][k])


def _check_input(net, x):
    if x.shape[-1] != net.input_dim:
        raise ValueError(f"input has dimension {x.shape[-1]}, network expects {net.input_dim}")


def trace_batch(net, X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None] if net.input_dim == 1 else X[None, :]
    _check_input(net, X)
    zs, hs = [], []
    a = X
    for w, act in zip(net.weights, net.activations):
        z = augment(a) @ w.T
        a = act(z)
        zs.append(z)
        hs.append(a)
    return BatchTrace(X, zs, hs)


def forward_trace(net, x):
    x = np.atleast_1d(np.asarray(x, dtype=float))
    _check_input(net, x)
    zs, hs = [], []
    a = x
    for w, act in zip(net.weights, net.activations):
        z = w @ augment(a)
        a = act(z)
        zs.append(z)
        hs.append(a)
    if len(zs) == 2:
        return Particle(x, zs[0], hs[0], zs[1], float(hs[1][0]))
    return Particle(x, zs[0], hs[0], zs[1], float(hs[2][0]), hs[1], zs[2])


def forward(net, x):
    return forward_trace(net, x).y_hat


def predict(net, X):
    """Vectorised forward pass over the rows of ``X``."""
    return trace_batch(net, X).y_hat


def fold_scaling(net, x_offset, x_scale, y_offset=0.0, y_scale=1.0):
    """Return a network acting on raw data equivalent to ``net`` acting on scaled data.

    ``net`` expects ``(x - x_offset) / x_scale`` and its output is mapped back
    by ``y * y_scale + y_offset``. The output part needs an identity output.
    """
    x_offset = np.broadcast_to(np.asarray(x_offset, dtype=float), (net.input_dim,))
    x_scale = np.broadcast_to(np.asarray(x_scale, dtype=float), (net.input_dim,))
    weights = [w.copy() for w in net.weights]
    w1 = weights[0]
    w1[:, 1:] = net.weights[0][:, 1:] / x_scale
    w1[:, 0] = net.weights[0][:, 0] + net.weights[0][:, 1:] @ (x_offset / x_scale)
    if y_scale != 1.0 or y_offset != 0.0:
        if net.activations[-1].name != "identity":
            raise ValueError("output rescaling can only be folded into an identity output layer")
        wl = weights[-1]
        wl[:, 1:] = net.weights[-1][:, 1:] * y_scale
        wl[:, 0] = net.weights[-1][:, 0] * y_scale - y_offset
    return Network(weights, list(net.activations))
