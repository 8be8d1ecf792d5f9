"""Gradient baselines on the same networks: full-batch GD and minibatch ADAM.

Loss is the mean squared error over the batch; gradients are hand-written
backpropagation through the bias-augmented layers.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .metrics import evaluate
from .network import Network, augment, init_glorot, init_network, predict
from .seeding import stream
from .trainer import EpochRecord, TrainHistory

log = logging.getLogger(__name__)


def backprop_gradients(net, X, y):
    """Gradient of ``mean((net(x) - y)**2)`` with respect to every weight matrix."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None] if net.input_dim == 1 else X[None, :]
    if X.shape[1] != net.input_dim:
        raise ValueError(f"input has dimension {X.shape[1]}, network expects {net.input_dim}")
    y = np.asarray(y, dtype=float).reshape(-1)
    inputs, zs = [], []
    a = X
    for w, act in zip(net.weights, net.activations):
        aug = augment(a)
        z = aug @ w.T
        inputs.append(aug)
        zs.append(z)
        a = act(z)
    delta = (2.0 / len(y)) * (a[:, 0] - y)[:, None] * net.activations[-1].derivative(zs[-1])
    grads = [None] * len(net.weights)
    for l in range(len(net.weights) - 1, -1, -1):
        grads[l] = delta.T @ inputs[l]
        if l:
            delta = (delta @ net.weights[l][:, 1:]) * net.activations[l - 1].derivative(zs[l - 1])
    return grads


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    t: int = 0

    def step(self, weights, grads):
        """Bias-corrected ADAM update; returns new weight arrays."""
        if not self.m:
            self.m = [np.zeros_like(w) for w in weights]
            self.v = [np.zeros_like(w) for w in weights]
        self.t += 1
        c1 = 1.0 - self.beta1**self.t
        c2 = 1.0 - self.beta2**self.t
        out = []
        for i, (w, g) in enumerate(zip(weights, grads)):
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g
            out.append(w - self.lr * (self.m[i] / c1) / (np.sqrt(self.v[i] / c2) + self.eps))
        return out


@dataclass
class GdConfig:
    """Shared settings of both baselines.

    ``batch_size=None`` means the whole training set (one step per epoch).
    ``init="glorot"`` draws the toolkit-style uniform initialisation;
    ``init="normal"`` uses N(0, ``init_variance``) like the bootstrap trainer.
    """

    lr: float = 0.001
    batch_size: int = None
    hidden: tuple = (100,)
    hidden_activation: str = "tanh"
    output_activation: str = "identity"
    init: str = "glorot"
    init_variance: float = 0.5
    seed: int = 0
    name: str = "GD"

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in np.atleast_1d(self.hidden))
        if self.lr < 0:
            raise ValueError("learning rate must be nonnegative")
        if self.init not in ("glorot", "normal"):
            raise ValueError(f"unknown init {self.init!r}")


def adam_config(**kw):
    kw.setdefault("batch_size", 200)
    kw.setdefault("name", "ADAM")
    return GdConfig(**kw)


def _fit(data, val, epochs, cfg, update):
    dims = (data.x.shape[1],) + cfg.hidden + (1,)
    rng = stream(cfg.seed, "init")
    if cfg.init == "glorot":
        net = init_glorot(dims, rng, cfg.hidden_activation, cfg.output_activation)
    else:
        net = init_network(dims, cfg.init_variance, rng, cfg.hidden_activation, cfg.output_activation)
    n = len(data)
    bs = n if cfg.batch_size is None else min(cfg.batch_size, n)
    classification = val.is_classification
    history = TrainHistory("accuracy" if classification else "mse")
    for epoch in range(1, epochs + 1):
        t0 = time.perf_counter()
        order = np.arange(n) if bs == n else stream(cfg.seed, cfg.name, "shuffle", epoch).permutation(n)
        with np.errstate(over="ignore", invalid="ignore"):
            for lo in range(0, n, bs):
                rows = order[lo:lo + bs]
                grads = backprop_gradients(net, data.x[rows], data.y[rows])
                net = Network(update(net.weights, grads), net.activations)
            report = evaluate(predict(net, val.x), val.y, classification)
        if not (np.isfinite(report.value) and all(np.all(np.isfinite(w)) for w in net.weights)):
            raise FloatingPointError(f"{cfg.name}: training diverged in epoch {epoch}")
        wall = (time.perf_counter() - t0) * 1e3
        history.records.append(EpochRecord(epoch, report.value, wall, (), ()))
        log.info("%s epoch %d %s=%.6g", cfg.name, epoch, report.metric, report.value)
    return net, history


def train_gd(data, val, epochs, cfg=None):
    """Plain gradient descent, by default one full-batch step per epoch."""
    cfg = cfg or GdConfig()
    return _fit(data, val, epochs, cfg,
                lambda ws, gs: [w - cfg.lr * g for w, g in zip(ws, gs)])


def train_adam(data, val, epochs, cfg=None, state=None):
    """Minibatch ADAM (batch size 200 unless configured otherwise)."""
    cfg = cfg or adam_config()
    state = state or AdamState(lr=cfg.lr)
    return _fit(data, val, epochs, cfg, state.step)
