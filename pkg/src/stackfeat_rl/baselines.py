"""Comparison selectors: stability selection, mRMR, cross-validated elastic
net, and the fixed-parameter dual-criterion algorithm."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.stats import rankdata

from .core import DataError, ExpressionDataset, FitCounter, make_rng, standardize_train_apply
from .enet import DEFAULT_L1_RATIO, DEFAULT_MAX_ITER, DEFAULT_TOL, cv_select_alpha, fit_enet, fit_path
from .episode import EpisodeConfig, run_fold

STACKFEAT_M_FRAC = 0.25


@dataclass
class StabilityConfig:
    n_lambdas: int = 25
    lambda_range: tuple[float, float] = (1e-3, 1e-1)
    n_subsamples: int = 100
    threshold: float = 0.9
    subsample_fraction: float = 0.5
    tol: float = DEFAULT_TOL
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        low, high = self.lambda_range
        if not 0 < low < high:
            raise ValueError("lambda_range must satisfy 0 < low < high")
        if self.n_subsamples < 1 or self.n_lambdas < 1:
            raise ValueError("n_subsamples and n_lambdas must be >= 1")
        if not 0 < self.threshold <= 1:
            raise ValueError("threshold must lie in (0, 1]")
        if not 0 < self.subsample_fraction <= 1:
            raise ValueError("subsample_fraction must lie in (0, 1]")

    @property
    def lambdas(self) -> np.ndarray:
        low, high = self.lambda_range
        return np.geomspace(high, low, self.n_lambdas)


def stability_scores(train: ExpressionDataset, config: StabilityConfig, seed: int = 0,
                     counter: FitCounter | None = None) -> np.ndarray:
    """Max-over-lambda lasso selection frequency across subsamples."""
    X, _, _, _ = standardize_train_apply(train.matrix)
    y = train.labels.astype(np.float64)
    n = X.shape[0]
    size = int(np.floor(n * config.subsample_fraction))
    if size < 2:
        raise DataError(f"subsample of {size} rows is too small")
    rng = make_rng(seed, "stability")
    lambdas = config.lambdas
    freq = np.zeros((lambdas.size, X.shape[1]))
    for _ in range(config.n_subsamples):
        rows = np.sort(rng.choice(n, size=size, replace=False))
        coefs, _ = fit_path(X[rows], y[rows], lambdas, l1_ratio=1.0, tol=config.tol,
                            max_iter=config.max_iter)
        freq += coefs != 0
    if counter is not None:
        counter.add_single(lambdas.size * config.n_subsamples)
    return (freq / config.n_subsamples).max(axis=0)


def stability_selection(train: ExpressionDataset, config: StabilityConfig | None = None,
                        seed: int = 0, counter: FitCounter | None = None) -> np.ndarray:
    config = config or StabilityConfig()
    scores = stability_scores(train, config, seed, counter)
    return np.flatnonzero(scores >= config.threshold)


# ---------------------------------------------------------------------------
# mRMR
# ---------------------------------------------------------------------------

def equal_frequency_bins(x, n_bins: int) -> np.ndarray:
    """Bin codes 0..n_bins-1 from average ranks; tied values share a bin."""
    x = np.asarray(x, dtype=np.float64)
    ranks = rankdata(x) - 1.0
    return np.minimum((ranks * n_bins / x.size).astype(np.int64), n_bins - 1)


def mutual_information(a, b) -> float:
    """Plug-in mutual information (nats) between two discrete code vectors."""
    a = np.asarray(a, dtype=np.int64)
    b = np.asarray(b, dtype=np.int64)
    joint = np.zeros((a.max() + 1, b.max() + 1))
    np.add.at(joint, (a, b), 1.0)
    joint /= a.size
    pa = joint.sum(axis=1, keepdims=True)
    pb = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    return float(np.sum(joint[nz] * np.log(joint[nz] / (pa @ pb)[nz])))


def mrmr(train: ExpressionDataset, k: int, n_bins: int = 10) -> np.ndarray:
    """Greedy MID selection: relevance minus mean redundancy, index tie-break.

    Returns indices in selection order.
    """
    p = train.n_features
    if not 1 <= k <= p:
        raise ValueError(f"k must lie in [1, {p}]")
    codes = np.column_stack([equal_frequency_bins(train.matrix[:, j], n_bins)
                             for j in range(p)])
    y = train.labels
    relevance = np.array([mutual_information(codes[:, j], y) for j in range(p)])
    redundancy = np.zeros(p)
    chosen: list[int] = []
    available = np.ones(p, dtype=bool)
    for step in range(k):
        score = relevance - (redundancy / step if step else 0.0)
        score = np.where(available, score, -np.inf)
        best = int(np.argmax(score))  # first maximum = smallest index
        chosen.append(best)
        available[best] = False
        for j in np.flatnonzero(available):
            redundancy[j] += mutual_information(codes[:, j], codes[:, best])
    return np.array(chosen, dtype=np.int64)


# ---------------------------------------------------------------------------
# elastic net and fixed dual criterion
# ---------------------------------------------------------------------------

def enet_select(train: ExpressionDataset, seed: int = 0, k_cv: int = 5, n_alphas: int = 100,
                l1_ratio: float = DEFAULT_L1_RATIO, counter: FitCounter | None = None,
                return_alpha: bool = False):
    """Nonzero coefficients of one fit at the cross-validated alpha."""
    X, _, _, _ = standardize_train_apply(train.matrix)
    y = train.labels.astype(np.float64)
    alpha, _ = cv_select_alpha(X, y, k_cv=k_cv, n_alphas=n_alphas, seed=seed,
                               l1_ratio=l1_ratio, counter=counter)
    fit = fit_enet(X, y, alpha, l1_ratio, counter=counter)
    if return_alpha:
        return fit.selected, alpha
    return fit.selected


def stackfeat_config(config: EpisodeConfig | None = None,
                     penalty_mode: str = "uniform",
                     m_frac_value: float = STACKFEAT_M_FRAC) -> EpisodeConfig:
    """Single episode, no learning, fixed retention fraction."""
    base = config or EpisodeConfig()
    return replace(base, episodes=1, learning_rate=0.0, m_frac_override=m_frac_value,
                   penalty_mode=penalty_mode, batch_size=1)


def stackfeat_fixed(train: ExpressionDataset, config: EpisodeConfig | None = None,
                    counter: FitCounter | None = None, network=None,
                    penalty_mode: str = "uniform",
                    m_frac_value: float = STACKFEAT_M_FRAC) -> np.ndarray:
    run = run_fold(train, stackfeat_config(config, penalty_mode, m_frac_value),
                   network=network, counter=counter)
    return run.panel
