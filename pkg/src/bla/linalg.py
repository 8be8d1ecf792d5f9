"""Dense symmetric-matrix utilities for the layer-wise regressions.

Running moment averages, extreme eigenvalues of small symmetric matrices and
the stationary (Richardson) fixed-point solver used for every layer solve.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

log = logging.getLogger(__name__)

DEFAULT_STEP_FACTOR = 1.95
DEFAULT_MAX_ITERS = 100_000
DEFAULT_TOL = 1e-10
ILL_CONDITIONED = 1e-12


class EigenConvergenceError(RuntimeError):
    """Extreme eigenvalue search hit its iteration cap.

    The best Ritz estimates are kept on ``lambda_min`` / ``lambda_max``.
    """

    def __init__(self, msg, lambda_min, lambda_max):
        super().__init__(msg)
        self.lambda_min = lambda_min
        self.lambda_max = lambda_max


class DivergenceError(RuntimeError):
    """The fixed-point iteration is growing: the spectrum of I - mu*A left the unit ball."""


@dataclass
class MomentState:
    """Running second moment ``a_hat`` and cross moment ``b_hat`` of one layer."""

    a_hat: np.ndarray
    b_hat: np.ndarray

    def __post_init__(self):
        self.a_hat = np.asarray(self.a_hat, dtype=float)
        self.b_hat = np.asarray(self.b_hat, dtype=float)
        if self.b_hat.ndim == 1:
            self.b_hat = self.b_hat[:, None]
        if self.a_hat.ndim != 2 or self.a_hat.shape[0] != self.a_hat.shape[1]:
            raise ValueError(f"a_hat must be square, got {self.a_hat.shape}")
        if self.b_hat.shape[0] != self.a_hat.shape[0]:
            raise ValueError(
                f"b_hat has {self.b_hat.shape[0]} rows, a_hat is {self.a_hat.shape[0]}-dimensional"
            )

    @classmethod
    def zeros(cls, in_dim, out_dim):
        return cls(np.zeros((in_dim, in_dim)), np.zeros((in_dim, out_dim)))

    @property
    def dim(self):
        return self.a_hat.shape[0]


def outer_sum(u, v=None):
    """Return ``sum_n u_n v_n^T`` over the rows of ``u`` and ``v``.

    With ``v`` omitted the result is symmetrised so it is bitwise symmetric.
    """
    u = np.asarray(u, dtype=float)
    if v is None:
        s = u.T @ u
        return 0.5 * (s + s.T)
    v = np.asarray(v, dtype=float)
    if v.ndim == 1:
        v = v[:, None]
    return u.T @ v


def weighted_moment_update(prev, batch_sum_A, batch_sum_b, r, n_batch):
    """Blend a carried-over moment state with raw sums from a new batch.

    Returns ``r/(r+n) * prev + 1/(r+n) * batch_sum`` for both moments, so
    ``r = 0`` discards the history and ``r = n`` weights both halves equally.
    """
    if n_batch < 1:
        raise ValueError("n_batch must be >= 1")
    if r < 0:
        raise ValueError("r must be nonnegative")
    batch_sum_A = np.asarray(batch_sum_A, dtype=float)
    batch_sum_b = np.asarray(batch_sum_b, dtype=float)
    if batch_sum_b.ndim == 1:
        batch_sum_b = batch_sum_b[:, None]
    if batch_sum_A.shape != prev.a_hat.shape or batch_sum_b.shape != prev.b_hat.shape:
        raise ValueError(
            f"shape mismatch: state {prev.a_hat.shape}/{prev.b_hat.shape}, "
            f"batch {batch_sum_A.shape}/{batch_sum_b.shape}"
        )
    keep = r / (r + n_batch)
    new = 1.0 / (r + n_batch)
    return MomentState(keep * prev.a_hat + new * batch_sum_A, keep * prev.b_hat + new * batch_sum_b)


def extreme_eigenvalues(m, tol=1e-6, max_iter=None, seed=0):
    """Smallest and largest eigenvalue of a symmetric matrix by Lanczos.

    Full reorthogonalisation is used; the run stops once the residual bound
    of both extreme Ritz values is below ``tol * max(1, |theta|)``. For an
    n x n matrix the Krylov space is complete after n steps, so the default
    cap of n steps always converges.

    Raises
    ------
    EigenConvergenceError
        If ``max_iter`` steps did not reach the tolerance.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got {m.shape}")
    n = m.shape[0]
    if n == 1:
        return float(m[0, 0]), float(m[0, 0])
    if max_iter is None:
        max_iter = n
    max_iter = min(max_iter, n)

    rng = np.random.default_rng(seed)
    Q = np.zeros((n, max_iter))
    alpha = np.zeros(max_iter)
    beta = np.zeros(max_iter)
    q = rng.standard_normal(n)
    q /= np.linalg.norm(q)
    scale = max(np.abs(m).max(), 1e-300)

    theta_min = theta_max = float("nan")
    for j in range(max_iter):
        Q[:, j] = q
        w = m @ q
        if j > 0:
            w -= beta[j - 1] * Q[:, j - 1]
        alpha[j] = q @ w
        w -= alpha[j] * q
        # two passes of classical Gram-Schmidt keep the basis orthogonal
        for _ in range(2):
            w -= Q[:, : j + 1] @ (Q[:, : j + 1].T @ w)
        beta[j] = np.linalg.norm(w)

        theta, S = eigh_tridiagonal(alpha[: j + 1], beta[:j], lapack_driver="stev")
        theta_min, theta_max = float(theta[0]), float(theta[-1])
        if j + 1 == n:
            break
        err_min = abs(beta[j] * S[-1, 0])
        err_max = abs(beta[j] * S[-1, -1])
        if err_min <= tol * max(1.0, abs(theta_min)) and err_max <= tol * max(1.0, abs(theta_max)):
            break
        if beta[j] <= 1e-14 * scale:
            # invariant subspace: restart from a fresh direction orthogonal to it
            beta[j] = 0.0
            q = rng.standard_normal(n)
            for _ in range(2):
                q -= Q[:, : j + 1] @ (Q[:, : j + 1].T @ q)
            q /= np.linalg.norm(q)
        else:
            q = w / beta[j]
    else:
        raise EigenConvergenceError(
            f"Lanczos did not converge in {max_iter} steps", theta_min, theta_max
        )
    return theta_min, theta_max


def step_size(lambda_min, lambda_max, factor=DEFAULT_STEP_FACTOR):
    """Constant gain ``factor / (lambda_max + lambda_min)`` for the Richardson solve."""
    if not 0.0 < factor < 2.0 + 1e-12:
        raise ValueError(f"factor must lie in (0, 2], got {factor}")
    total = lambda_max + lambda_min
    if total <= 0.0:
        raise ValueError(
            f"lambda_max + lambda_min = {total} <= 0: singular or empty moment matrix"
        )
    return factor / total


def contraction_rate(lambda_min, lambda_max, mu):
    """Spectral radius of ``I - mu*A`` given the extreme eigenvalues of ``A``."""
    return max(abs(1.0 - mu * lambda_min), abs(1.0 - mu * lambda_max))


def richardson_solve(
    a,
    b,
    w0,
    mu,
    max_iters=DEFAULT_MAX_ITERS,
    tol=DEFAULT_TOL,
    method="iterate",
    callback=None,
):
    """Solve ``a w = b`` by the fixed-point iteration ``w <- w + mu (b - a w)``.

    Stops after the first update whose Frobenius norm is below ``tol`` or
    after ``max_iters`` updates, and returns ``(w, iterations)``.

    ``method="iterate"`` runs the loop literally. ``method="spectral"``
    evaluates the very same iterate in the eigenbasis of ``a``: with
    ``g = 1 - mu*lambda`` the update at step t is ``mu g^(t-1) r`` (r the
    initial residual) and the iterate after t steps is
    ``w0 + (1 - g^t)/lambda * r``, so the stopping step is found by bisection
    on the monotone update norm. Cost no longer depends on ``max_iters``.
    ``callback(t, w)`` is only honoured by the literal loop.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    vector = b.ndim == 1
    if vector:
        b = b[:, None]
    w = np.array(w0, dtype=float).reshape(b.shape)
    if a.shape != (b.shape[0], b.shape[0]):
        raise ValueError(f"shape mismatch: a {a.shape}, b {b.shape}")
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")

    if method == "iterate":
        w, iters = _richardson_loop(a, b, w, mu, max_iters, tol, callback)
    elif method == "spectral":
        w, iters = _richardson_spectral(a, b, w, mu, max_iters, tol)
    else:
        raise ValueError(f"unknown method {method!r}")
    return (w[:, 0] if vector else w), iters


def _richardson_loop(a, b, w, mu, max_iters, tol, callback):
    best = np.inf
    for t in range(1, max_iters + 1):
        u = mu * (b - a @ w)
        w += u
        norm = np.sqrt(np.sum(u * u))
        if callback is not None:
            callback(t, w)
        if not np.isfinite(norm) or norm > 10.0 * best:
            raise DivergenceError(
                f"update norm {norm:.3e} at step {t} exceeds 10x its minimum {best:.3e}"
            )
        best = min(best, norm)
        if norm < tol:
            return w, t
    return w, max_iters


def _richardson_spectral(a, b, w0, mu, max_iters, tol):
    lam, Q = np.linalg.eigh(a)
    x = mu * lam
    g = 1.0 - x
    if np.any(np.abs(g) > 1.0 + 1e-9):
        raise DivergenceError(
            f"spectral radius of I - mu*A is {np.abs(g).max():.6f} > 1; the iteration diverges"
        )
    rt = Q.T @ (b - a @ w0)
    energy = np.sum(rt * rt, axis=1)
    g_abs = np.abs(g)

    def update_norm(t):
        # ||u_t||_F with u_t = mu * Q diag(g^(t-1)) rt
        return mu * np.sqrt(np.sum(energy * g_abs ** (2 * (t - 1))))

    if update_norm(max_iters) >= tol:
        t = max_iters
    else:
        lo, hi = 1, max_iters
        while lo < hi:
            mid = (lo + hi) // 2
            if update_norm(mid) < tol:
                hi = mid
            else:
                lo = mid + 1
        t = lo

    # coefficient mu * sum_{s<t} g^s, written to stay accurate as x -> 0
    coef = np.empty_like(x)
    pos = x < 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        coef[pos] = -np.expm1(t * np.log1p(-x[pos])) / x[pos]
        coef[~pos] = (1.0 - g[~pos] ** t) / x[~pos]
    tiny = np.abs(x) < 1e-300
    coef[tiny] = float(t)
    coef *= mu
    return w0 + Q @ (coef[:, None] * rt), t


def condition_number(lambda_min, lambda_max):
    """Ratio lambda_max / lambda_min, ``inf`` when the matrix is numerically singular."""
    if lambda_min <= 0.0:
        return float("inf")
    return lambda_max / lambda_min


def solve_layer(state, w0, factor=DEFAULT_STEP_FACTOR, max_iters=DEFAULT_MAX_ITERS,
                tol=DEFAULT_TOL, method="spectral", eig_tol=1e-6):
    """Step size from the extreme eigenvalues of ``state.a_hat``, then Richardson solve.

    Returns ``(w, iterations, condition_number)``.
    """
    lmin, lmax = extreme_eigenvalues(state.a_hat, tol=eig_tol)
    cond = condition_number(lmin, lmax)
    if lmin < ILL_CONDITIONED * lmax:
        log.debug("ill-conditioned moment matrix: lambda_min=%.3e lambda_max=%.3e", lmin, lmax)
    mu = step_size(max(lmin, 0.0), lmax, factor)
    w, iters = richardson_solve(state.a_hat, state.b_hat, w0, mu, max_iters, tol, method=method)
    return w, iters, cond
