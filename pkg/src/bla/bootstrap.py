"""Scoring and resampling of bootstrap particle proposals.

For each real datum ``(x, y)`` the proposals of the current batch are ranked
by their distance to ``(x_hat, y_hat)``, the ``delta`` closest are kept and
one of them is drawn with probability proportional to its score. The drawn
particle lends its hidden values to a mixed particle that keeps the real
``x`` and ``y``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class DistanceKind(str, enum.Enum):
    SQUARED_L2 = "squared_l2"
    LINF = "linf"


@dataclass
class MixedParticle:
    x: np.ndarray
    z1_hat: np.ndarray
    h_hat: np.ndarray
    z2: float
    y: float


def distance(datum, particle, kind=DistanceKind.SQUARED_L2):
    """Distance between ``(x, y)`` and a particle's ``(x_hat, y_hat)``."""
    x, y = datum
    x = np.atleast_1d(np.asarray(x, dtype=float))
    x_hat = np.atleast_1d(np.asarray(particle.x_hat, dtype=float))
    if x.shape != x_hat.shape:
        raise ValueError(f"datum input {x.shape} vs particle input {x_hat.shape}")
    diff = np.append(x - x_hat, float(y) - float(particle.y_hat))
    if DistanceKind(kind) is DistanceKind.SQUARED_L2:
        return float(diff @ diff)
    return float(np.max(np.abs(diff)))


def score(l, power=2):
    """``exp(-l**power)``; ``power=2`` is the default kernel."""
    return np.exp(-np.asarray(l, dtype=float) ** power)


def top_delta(scores, delta):
    """Indices of the ``delta`` highest scores, ties going to the lower index.

    ``scores`` is a sequence of ``(index, score)`` pairs.
    """
    ranked = sorted(scores, key=lambda p: (-p[1], p[0]))
    return [i for i, _ in ranked[:delta]]


def _pick(weights, u):
    """Inverse-CDF draw: first slot whose cumulative weight exceeds ``u * total``."""
    c = np.cumsum(weights)
    total = c[-1]
    if not total > 0.0:
        return min(int(u * len(weights)), len(weights) - 1)
    return min(int(np.searchsorted(c, u * total, side="right")), len(weights) - 1)


def sample_particle(indices, scores, rng):
    """Draw one of ``indices`` with probability proportional to ``scores``.

    All-zero scores (complete underflow) fall back to a uniform draw.
    """
    if len(indices) != len(scores) or not len(indices):
        raise ValueError("need matching, nonempty indices and scores")
    return indices[_pick(np.asarray(scores, dtype=float), rng.random())]


def draw_second_particle(indices, scores, rng):
    """Independent second draw from the same per-datum distribution."""
    return sample_particle(indices, scores, rng)


def make_mixed(datum, sampled, sigma2):
    x, y = datum
    return MixedParticle(
        x=np.asarray(x),
        z1_hat=sampled.z1_hat,
        h_hat=sampled.h_hat,
        z2=float(sigma2.inverse(y)),
        y=y,
    )


def _pairwise(x, y, x_hat, y_hat, kind):
    if kind is DistanceKind.SQUARED_L2:
        d = (y[:, None] - y_hat[None, :]) ** 2
        for j in range(x.shape[1]):
            d += (x[:, j, None] - x_hat[None, :, j]) ** 2
        return d
    d = np.abs(y[:, None] - y_hat[None, :])
    for j in range(x.shape[1]):
        np.maximum(d, np.abs(x[:, j, None] - x_hat[None, :, j]), out=d)
    return d


def nearest_candidates(x, y, x_hat, y_hat, delta, kind=DistanceKind.SQUARED_L2, chunk=1024):
    """The ``delta`` closest proposals of every datum.

    Returns ``(idx, dist)`` of shape ``(N, min(delta, K))``, each row ordered
    by increasing distance with ties broken by the lower proposal index.
    """
    kind = DistanceKind(kind)
    x = np.asarray(x, dtype=float).reshape(len(y), -1)
    x_hat = np.asarray(x_hat, dtype=float).reshape(len(y_hat), -1)
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    n, k = len(y), len(y_hat)
    delta = min(int(delta), k)
    idx = np.empty((n, delta), dtype=np.intp)
    dist = np.empty((n, delta))
    for lo in range(0, n, chunk):
        hi = min(lo + chunk, n)
        d = _pairwise(x[lo:hi], y[lo:hi], x_hat, y_hat, kind)
        if delta < k:
            part = np.argpartition(d, delta - 1, axis=1)[:, :delta]
        else:
            part = np.broadcast_to(np.arange(k), (hi - lo, k)).copy()
        pd = np.take_along_axis(d, part, axis=1)
        # boundary ties: argpartition may have kept a higher index than an equal excluded one
        kth = pd.max(axis=1)
        if delta < k:
            n_le = np.count_nonzero(d <= kth[:, None], axis=1)
            for r in np.flatnonzero(n_le > delta):
                order = np.argsort(d[r], kind="stable")[:delta]
                part[r] = order
                pd[r] = d[r, order]
        order = np.lexsort((part, pd), axis=1)
        idx[lo:hi] = np.take_along_axis(part, order, axis=1)
        dist[lo:hi] = np.take_along_axis(pd, order, axis=1)
    return idx, dist


def relative_scores(dist, power=2):
    """Per-row ``exp(-(d**power - min d**power))``.

    Differs from ``score`` by a constant factor per row, so the categorical
    distribution over candidates is unchanged while the closest candidate
    always gets weight 1 instead of underflowing.
    """
    s = np.asarray(dist, dtype=float) ** power
    return np.exp(-(s - s.min(axis=1, keepdims=True)))


def sample_rows(idx, weights, rng, draws=1):
    """One (or ``draws`` independent) categorical draws per row.

    Uniforms are consumed row by row in datum order, so the result depends
    only on the generator state. Returns ``(N,)`` or ``(N, draws)`` indices.
    """
    c = np.cumsum(weights, axis=1)
    u = rng.random((len(idx), draws))
    target = u * c[:, -1:]
    slot = np.empty((len(idx), draws), dtype=np.intp)
    for j in range(draws):
        slot[:, j] = np.count_nonzero(c <= target[:, j, None], axis=1)
    np.minimum(slot, idx.shape[1] - 1, out=slot)
    chosen = np.take_along_axis(idx, slot, axis=1)
    return chosen[:, 0] if draws == 1 else chosen
