"""Weighted elastic net by cyclic coordinate descent.

Minimises::

    1/(2n) ||y - X b - b0||^2 + sum_i lam_i * (rho |b_i| + (1 - rho)/2 b_i^2)

with one penalty multiplier ``lam_i`` per feature and mixing ``rho`` (the
``l1_ratio``).  The intercept is never penalised.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from numba import njit

from .core import FitCounter, FitResult, make_folds

DEFAULT_L1_RATIO = 0.5
DEFAULT_TOL = 1e-4
DEFAULT_MAX_ITER = 1000
# Safety margin so that a fit at alpha_max is exactly zero despite rounding.
_ALPHA_MAX_MARGIN = 1e-10


def soft_threshold(x, t):
    """Return ``sign(x) * max(|x| - t, 0)``."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("threshold must be non-negative")
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


@dataclass(frozen=True, eq=False)
class PenaltyVector:
    per_feature: np.ndarray
    l1_ratio: float = DEFAULT_L1_RATIO

    def __post_init__(self):
        lam = np.asarray(self.per_feature, dtype=np.float64).ravel()
        if not np.all(np.isfinite(lam)) or np.any(lam < 0):
            raise ValueError("penalties must be finite and non-negative")
        if not 0.0 < self.l1_ratio <= 1.0:
            raise ValueError("l1_ratio must lie in (0, 1]")
        object.__setattr__(self, "per_feature", lam)

    @classmethod
    def uniform(cls, alpha: float, n_features: int, l1_ratio: float = DEFAULT_L1_RATIO):
        return cls(np.full(n_features, float(alpha)), l1_ratio)

    def __len__(self):
        return self.per_feature.shape[0]


class AlphaGrid(NamedTuple):
    values: np.ndarray
    alpha_max: float
    eps_ratio: float


class CVCurve(NamedTuple):
    alphas: np.ndarray
    mean_mse: np.ndarray


# ---------------------------------------------------------------------------
# kernel
# ---------------------------------------------------------------------------

@njit(cache=True)
def _objective(r, beta, l1, l2, n):
    obj = 0.5 * np.dot(r, r) / n
    for j in range(beta.shape[0]):
        b = beta[j]
        obj += l1[j] * abs(b) + 0.5 * l2[j] * b * b
    return obj


@njit(cache=True)
def _cd(X, r, beta, l1, l2, col_sq, tol, max_iter, trace):
    """Cyclic coordinate descent on centred data, updating ``beta`` and the
    residual ``r`` in place.  ``trace`` (length >= max_iter + 1, or 0) receives
    the objective after each sweep."""
    n, p = X.shape
    record = trace.shape[0] > 0
    if record:
        trace[0] = _objective(r, beta, l1, l2, n)
    max_upd = 0.0
    it = 0
    while it < max_iter:
        it += 1
        max_upd = 0.0
        for j in range(p):
            denom = col_sq[j] + l2[j]
            if denom <= 0.0:
                continue
            old = beta[j]
            g = 0.0
            for i in range(n):
                g += X[i, j] * r[i]
            z = g / n + col_sq[j] * old
            if z > l1[j]:
                new = (z - l1[j]) / denom
            elif z < -l1[j]:
                new = (z + l1[j]) / denom
            else:
                new = 0.0
            d = new - old
            if d != 0.0:
                for i in range(n):
                    r[i] -= d * X[i, j]
                beta[j] = new
                if abs(d) > max_upd:
                    max_upd = abs(d)
        if record:
            trace[it] = _objective(r, beta, l1, l2, n)
        if max_upd < tol:
            break
    return it, max_upd


class _Centred:
    """Column-centred copy of a design restricted to some rows."""

    def __init__(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        self.n = X.shape[0]
        self.x_mean = X.mean(axis=0)
        self.y_mean = float(y.mean())
        self.Xc = np.asfortranarray(X - self.x_mean)
        self.yc = y - self.y_mean
        self.col_sq = np.einsum("ij,ij->j", self.Xc, self.Xc) / self.n

    def solve(self, l1, l2, beta0, tol, max_iter, trace=None):
        beta = np.array(beta0, dtype=np.float64, copy=True)
        r = self.yc - self.Xc @ beta
        tr = np.zeros(0) if trace is None else trace
        it, upd = _cd(self.Xc, r, beta, l1, l2, self.col_sq, float(tol),
                      int(max_iter), tr)
        intercept = self.y_mean - float(self.x_mean @ beta)
        return beta, intercept, int(it), float(upd)


def _split_penalty(penalties: PenaltyVector):
    lam = penalties.per_feature
    rho = penalties.l1_ratio
    return lam * rho, lam * (1.0 - rho)


def penalised_objective(X, y, coef, intercept, penalties: PenaltyVector) -> float:
    X = np.asarray(X, dtype=np.float64)
    r = np.asarray(y, dtype=np.float64) - X @ coef - intercept
    l1, l2 = _split_penalty(penalties)
    return float(0.5 * r @ r / X.shape[0] + l1 @ np.abs(coef) + 0.5 * l2 @ (coef ** 2))


def fit_weighted_enet(X, y, penalties: PenaltyVector, tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER, counter: FitCounter | None = None,
                      beta0=None, debug: bool = False) -> FitResult:
    """Fit the weighted elastic net.

    ``X`` is expected to be standardised and ``y`` centred, but both are
    re-centred internally so the intercept is always exact.  Convergence is
    declared when the largest coefficient change in a full sweep falls below
    ``tol``; hitting ``max_iter`` returns ``converged=False``.

    With ``debug=True`` the penalised objective is recorded after every sweep
    and checked to be non-increasing.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if len(penalties) != X.shape[1]:
        raise ValueError(
            f"{len(penalties)} penalties for {X.shape[1]} features")
    cen = _Centred(X, y)
    l1, l2 = _split_penalty(penalties)
    beta0 = np.zeros(X.shape[1]) if beta0 is None else beta0
    trace = np.full(max_iter + 1, np.nan) if debug else None
    beta, b0, it, upd = cen.solve(l1, l2, beta0, tol, max_iter, trace)
    if debug:
        tr = trace[: it + 1]
        if np.any(np.diff(tr) > 1e-12 * max(1.0, abs(tr[0]))):
            raise AssertionError("objective increased during coordinate descent")
    if counter is not None:
        counter.add_single(1)
    return FitResult(beta, b0, it, upd < tol, max_update=upd)


def fit_enet(X, y, alpha: float, l1_ratio: float = DEFAULT_L1_RATIO, **kwargs) -> FitResult:
    """Unweighted elastic net at scalar strength ``alpha``."""
    X = np.asarray(X, dtype=np.float64)
    return fit_weighted_enet(X, y, PenaltyVector.uniform(alpha, X.shape[1], l1_ratio),
                             **kwargs)


def alpha_max(X, y, l1_ratio: float = DEFAULT_L1_RATIO) -> float:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = X.shape[0]
    corr = (X - X.mean(axis=0)).T @ (y - y.mean())
    return float(np.max(np.abs(corr)) / (n * l1_ratio)) * (1.0 + _ALPHA_MAX_MARGIN)


def make_alpha_grid(X, y, n_alphas: int = 100, eps_ratio: float = 1e-3,
                    l1_ratio: float = DEFAULT_L1_RATIO) -> AlphaGrid:
    """Geometric grid from ``alpha_max`` (smallest alpha with an all-zero fit)
    down to ``eps_ratio * alpha_max``."""
    if l1_ratio <= 0:
        raise ValueError("l1_ratio must be positive")
    if n_alphas < 1:
        raise ValueError("n_alphas must be >= 1")
    amax = alpha_max(X, y, l1_ratio)
    if amax <= 0.0:
        raise ValueError("alpha_max is zero: X (or centred y) is all zeros")
    if n_alphas == 1:
        values = np.array([amax])
    else:
        values = amax * eps_ratio ** (np.arange(n_alphas) / (n_alphas - 1))
        values[0] = amax
    return AlphaGrid(values, amax, float(eps_ratio))


def fit_path(X, y, alphas, l1_ratio: float = DEFAULT_L1_RATIO, tol: float = DEFAULT_TOL,
             max_iter: int = DEFAULT_MAX_ITER):
    """Warm-started fits along a decreasing sequence of scalar alphas.

    Returns ``(coefs, intercepts)`` with ``coefs`` of shape (n_alphas, p).
    The caller is responsible for fit accounting.
    """
    cen = _Centred(X, y)
    p = cen.Xc.shape[1]
    beta = np.zeros(p)
    coefs = np.empty((len(alphas), p))
    intercepts = np.empty(len(alphas))
    ones = np.ones(p)
    for a, alpha in enumerate(alphas):
        beta, b0, _, _ = cen.solve(ones * alpha * l1_ratio, ones * alpha * (1 - l1_ratio),
                                   beta, tol, max_iter)
        coefs[a] = beta
        intercepts[a] = b0
    return coefs, intercepts


def cv_select_alpha(X, y, k_cv: int = 5, n_alphas: int = 100, seed: int = 0,
                    l1_ratio: float = DEFAULT_L1_RATIO, eps_ratio: float = 1e-3,
                    tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                    counter: FitCounter | None = None):
    """Choose alpha on a geometric grid by k-fold cross-validated MSE.

    Folds are stratified when ``y`` is binary.  Ties in mean validation MSE
    go to the larger (sparser) alpha.  Every (fold, alpha) pair counts as one
    fit in ``counter.cv_fits``.

    Returns
    -------
    alpha : float
    curve : CVCurve
    """
    if k_cv < 2:
        raise ValueError("k_cv must be >= 2")
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    grid = make_alpha_grid(X, y, n_alphas, eps_ratio, l1_ratio)
    values = np.unique(y)
    binary = values.size == 2 and np.bincount(
        np.searchsorted(values, y)).min() >= k_cv
    strat_labels = np.searchsorted(values, y) if binary else y
    plan = make_folds(strat_labels, k_cv, seed, stratified=binary)
    mse = np.zeros((k_cv, grid.values.size))
    for f, (tr, te) in enumerate(plan):
        if tr.size < 2 or te.size < 1:
            raise ValueError(f"fold {f} too small to fit ({tr.size} train rows)")
        coefs, b0 = fit_path(X[tr], y[tr], grid.values, l1_ratio, tol, max_iter)
        pred = X[te] @ coefs.T + b0
        mse[f] = np.mean((y[te, None] - pred) ** 2, axis=0)
    if counter is not None:
        counter.add_cv(k_cv * grid.values.size)
    curve = mse.sum(axis=0) / k_cv
    best = int(np.flatnonzero(curve == curve.min())[0])
    return float(grid.values[best]), CVCurve(grid.values, curve)


def write_cv_curve(path, curve: CVCurve):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["alpha", "mean_mse"])
        for a, m in zip(curve.alphas, curve.mean_mse):
            w.writerow([repr(float(a)), repr(float(m))])
