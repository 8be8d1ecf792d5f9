"""Batch-mode bootstrap learning for networks with one or two hidden layers.

Each batch: trace the batch through the current network to get particle
proposals, resample hidden values for every datum from its closest
proposals, then refit every layer as an independent linear regression on
the mixed particles (running moments + Richardson solve).
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from . import bootstrap, linalg
from .data import Dataset
from .metrics import evaluate
from .network import Network, augment, fold_scaling, init_network, predict, trace_batch
from .seeding import stream

log = logging.getLogger(__name__)

FIRST_BATCH_ZERO = "first_batch_zero"
FIRST_EPOCH_ZERO = "first_epoch_zero"

DEFAULT_BATCHES = {1: 10, 2: 5, 3: 3, 4: 2}


@dataclass
class BlaConfig:
    hidden: tuple = (100,)
    hidden_activation: str = "tanh"
    output_activation: str = "identity"
    epochs: int = 50
    delta_start: int = 40
    delta_floor: int = 8
    r_policy: str = FIRST_BATCH_ZERO
    step_factor: float = linalg.DEFAULT_STEP_FACTOR
    inner_max_iters: int = linalg.DEFAULT_MAX_ITERS
    inner_tol: float = linalg.DEFAULT_TOL
    solver: str = "spectral"
    eig_tol: float = 1e-6
    distance: str = "squared_l2"
    score_power: int = 2
    init_variance: float = 0.5
    scaling: str = "standard"
    input_spread: float = 4.0
    batches: dict = field(default_factory=lambda: dict(DEFAULT_BATCHES))
    seed: int = 0
    name: str = "BLA"

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in np.atleast_1d(self.hidden))
        if self.delta_floor > self.delta_start or self.delta_floor < 1:
            raise ValueError("need 1 <= delta_floor <= delta_start")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.r_policy not in (FIRST_BATCH_ZERO, FIRST_EPOCH_ZERO):
            raise ValueError(f"unknown r_policy {self.r_policy!r}")
        if self.scaling not in ("none", "standard", "minmax"):
            raise ValueError(f"unknown scaling {self.scaling!r}")
        if self.input_spread <= 0:
            raise ValueError("input_spread must be positive")
        self.distance = bootstrap.DistanceKind(self.distance).value


def batches_in_epoch(epoch, cfg=None):
    table = cfg.batches if cfg is not None else DEFAULT_BATCHES
    return table.get(epoch, 1)


def batch_partition(n, count):
    """Split ``range(n)`` into ``count`` contiguous slices of size ``n // count``.

    The remainder goes to the last slice.
    """
    count = max(1, min(count, n))
    size = n // count
    bounds = [i * size for i in range(count)] + [n]
    return [slice(bounds[i], bounds[i + 1]) for i in range(count)]


def delta_schedule(global_batch_index, cfg):
    if global_batch_index < 1:
        raise ValueError("batch index starts at 1")
    return max(cfg.delta_start - (global_batch_index - 1), cfg.delta_floor)


def r_policy(epoch, batch_in_epoch, n_batch, cfg):
    if cfg.r_policy == FIRST_EPOCH_ZERO:
        return 0 if epoch == 1 else n_batch
    return 0 if (epoch == 1 and batch_in_epoch == 1) else n_batch


@dataclass
class Scaler:
    """Affine map applied to inputs and outputs before training.

    ``standard`` gives every input column standard deviation ``input_spread``
    and the output unit standard deviation; ``minmax`` maps inputs onto
    ``[-input_spread, input_spread]`` and the output onto ``[-1, 1]``.
    """

    x_offset: np.ndarray
    x_scale: np.ndarray
    y_offset: float = 0.0
    y_scale: float = 1.0

    @classmethod
    def fit(cls, data, mode="standard", scale_y=True, input_spread=1.0):
        d = data.x.shape[1]
        if mode == "none":
            return cls(np.zeros(d), np.ones(d))
        if mode == "standard":
            xo, xs = data.x.mean(axis=0), data.x.std(axis=0)
            yo, ys = float(data.y.mean()), float(data.y.std())
        elif mode == "minmax":
            lo, hi = data.x.min(axis=0), data.x.max(axis=0)
            xo, xs = (hi + lo) / 2, (hi - lo) / 2
            ylo, yhi = float(data.y.min()), float(data.y.max())
            yo, ys = (yhi + ylo) / 2, (yhi - ylo) / 2
        else:
            raise ValueError(f"unknown scaling {mode!r}")
        xs = np.where(xs > 0, xs, 1.0) / input_spread
        if not scale_y or ys <= 0:
            yo, ys = 0.0, 1.0
        return cls(xo, xs, yo, ys)

    def transform(self, data):
        return Dataset((data.x - self.x_offset) / self.x_scale,
                       (data.y - self.y_offset) / self.y_scale, data.name, data.domain)

    def unscale(self, net):
        return fold_scaling(net, self.x_offset, self.x_scale, self.y_offset, self.y_scale)


@dataclass
class EpochRecord:
    epoch: int
    metric: float
    wall_ms: float
    inner_iters: tuple
    cond: tuple


@dataclass
class TrainHistory:
    metric_name: str = "mse"
    records: list = field(default_factory=list)

    def metric_at(self, epoch):
        for r in self.records:
            if r.epoch == epoch:
                return r.metric
        raise KeyError(epoch)

    @property
    def metrics(self):
        return [r.metric for r in self.records]

    def header(self):
        n_layers = max([len(r.inner_iters) for r in self.records] + [2])
        cols = ["epoch", "metric", "wall_ms", "inner_iters_layer1", "inner_iters_layer2",
                "cond_A1", "cond_A2"]
        for l in range(3, n_layers + 1):
            cols += [f"inner_iters_layer{l}", f"cond_A{l}"]
        return cols, n_layers

    def rows(self, timing=True):
        _, n_layers = self.header()
        for r in self.records:
            iters = list(r.inner_iters) + [""] * (n_layers - len(r.inner_iters))
            cond = [_fmt(c) for c in r.cond] + [""] * (n_layers - len(r.cond))
            row = [r.epoch, _fmt(r.metric), _fmt(r.wall_ms) if timing else "",
                   iters[0], iters[1], cond[0], cond[1]]
            for l in range(2, n_layers):
                row += [iters[l], cond[l]]
            yield row

    def to_csv(self, path, timing=True):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(self.header()[0])
            w.writerows(self.rows(timing))


def _fmt(v):
    if v == "" or v is None:
        return ""
    return repr(float(v))


def _moment_dims(net):
    return [(w.shape[1], w.shape[0]) for w in net.weights]


def _mixed_regressions(net, xb, yb, cfg, delta, rng):
    """Per-layer (inputs, targets) built from the resampled mixed particles."""
    tr = trace_batch(net, xb)
    idx, dist = bootstrap.nearest_candidates(xb, yb, xb, tr.y_hat, delta, cfg.distance)
    weights = bootstrap.relative_scores(dist, cfg.score_power)
    z_out = net.activations[-1].inverse(yb)[:, None]
    if net.n_hidden == 1:
        k = bootstrap.sample_rows(idx, weights, rng)
        return [(augment(xb), tr.zs[0][k]), (augment(tr.hs[0][k]), z_out)]
    kk = bootstrap.sample_rows(idx, weights, rng, draws=2)
    kj, ku = kk[:, 0], kk[:, 1]
    return [
        (augment(xb), tr.zs[0][kj]),
        (augment(tr.hs[0][kj]), tr.zs[1][ku]),
        (augment(tr.hs[1][ku]), z_out),
    ]


def train_epoch(net, data, moments, epoch, cfg, batch_offset=0):
    """One pass over ``data`` (already in training coordinates).

    ``batch_offset`` is the number of batches processed in earlier epochs.
    Returns ``(net, moments, stats)`` where stats holds per-layer inner
    iteration totals and the last condition numbers.
    """
    order = stream(cfg.seed, cfg.name, "shuffle", epoch).permutation(len(data))
    parts = batch_partition(len(data), batches_in_epoch(epoch, cfg))
    n_layers = len(net.weights)
    iters = [0] * n_layers
    conds = [float("nan")] * n_layers
    net = net.copy()
    moments = list(moments)
    for b, part in enumerate(parts, start=1):
        gb = batch_offset + b
        rows = order[part]
        xb, yb = data.x[rows], data.y[rows]
        n = len(rows)
        rng = stream(cfg.seed, cfg.name, "sample", gb)
        regs = _mixed_regressions(net, xb, yb, cfg, delta_schedule(gb, cfg), rng)
        r = r_policy(epoch, b, n, cfg)
        new_weights = []
        for l, (u, v) in enumerate(regs):
            moments[l] = linalg.weighted_moment_update(
                moments[l], linalg.outer_sum(u), linalg.outer_sum(u, v), r, n)
            w0 = np.zeros_like(moments[l].b_hat) if gb == 1 else net.weights[l].T
            w, it, cond = linalg.solve_layer(
                moments[l], w0, cfg.step_factor, cfg.inner_max_iters, cfg.inner_tol,
                method=cfg.solver, eig_tol=cfg.eig_tol)
            new_weights.append(w.T.copy())
            iters[l] += it
            conds[l] = cond
        net = Network(new_weights, net.activations)
    return net, moments, {"inner_iters": tuple(iters), "cond": tuple(conds), "batches": len(parts)}


def _train(data, val, cfg, n_hidden):
    if len(cfg.hidden) != n_hidden:
        raise ValueError(f"expected {n_hidden} hidden widths, got {cfg.hidden}")
    # 0/1 labels stay as they are; standardizing them sharpens the pull of label noise
    scale_y = cfg.output_activation == "identity" and not data.is_classification
    scaler = Scaler.fit(data, cfg.scaling, scale_y=scale_y, input_spread=cfg.input_spread)
    train = scaler.transform(data)
    dims = (data.x.shape[1],) + cfg.hidden + (1,)
    net = init_network(dims, cfg.init_variance, stream(cfg.seed, "init"),
                       cfg.hidden_activation, cfg.output_activation)
    moments = [linalg.MomentState.zeros(i, o) for i, o in _moment_dims(net)]
    classification = val.is_classification
    history = TrainHistory("accuracy" if classification else "mse")
    done = 0
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        net, moments, stats = train_epoch(net, train, moments, epoch, cfg, done)
        done += stats["batches"]
        wall = (time.perf_counter() - t0) * 1e3
        report = evaluate(predict(scaler.unscale(net), val.x), val.y, classification)
        history.records.append(
            EpochRecord(epoch, report.value, wall, stats["inner_iters"], stats["cond"]))
        log.info("%s epoch %d %s=%.6g (%.0f ms)", cfg.name, epoch, report.metric,
                 report.value, wall)
    return scaler.unscale(net), history


def train_bla(data, val, cfg):
    """Train a one-hidden-layer network; returns ``(network, history)``.

    The returned network acts on raw (unscaled) inputs and outputs.
    """
    return _train(data, val, cfg, 1)


def train_bla_two_hidden(data, val, cfg):
    """Two-hidden-layer variant: two independent particle draws per datum."""
    return _train(data, val, cfg, 2)
