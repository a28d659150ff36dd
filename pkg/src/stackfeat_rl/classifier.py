"""L2-regularised logistic regression and ROC-AUC."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, log_expit
from scipy.stats import rankdata

from .core import DataError, ExpressionDataset, derive_seed, make_folds, standardize_train_apply

DEFAULT_L2 = 1.0


class ConvergenceWarning(UserWarning):
    pass


@dataclass(frozen=True, eq=False)
class LogisticModel:
    weights: np.ndarray
    intercept: float
    l2_strength: float
    converged: bool = True
    n_iter: int = 0

    def decision_function(self, X) -> np.ndarray:
        return np.asarray(X, dtype=np.float64) @ self.weights + self.intercept

    def predict_proba(self, X) -> np.ndarray:
        return expit(self.decision_function(X))


def logistic_loss(X, y, weights, intercept, l2_strength) -> float:
    """Penalised negative log-likelihood, ``sum NLL + l2/2 ||w||^2``."""
    eta = np.asarray(X) @ weights + intercept
    nll = -np.sum(y * log_expit(eta) + (1 - y) * log_expit(-eta))
    return float(nll + 0.5 * l2_strength * weights @ weights)


def logistic_gradient(X, y, weights, intercept, l2_strength) -> np.ndarray:
    """Gradient of :func:`logistic_loss` w.r.t. ``(weights, intercept)``."""
    X = np.asarray(X, dtype=np.float64)
    resid = expit(X @ weights + intercept) - y
    return np.concatenate([X.T @ resid + l2_strength * weights, [resid.sum()]])


def fit_logreg(X, y, l2_strength: float = DEFAULT_L2, tol: float = 1e-8,
               max_iter: int = 100) -> LogisticModel:
    """Newton-Raphson (IRLS) fit with backtracking.

    Falls back to a gradient step when the Hessian is not positive definite
    numerically.  Convergence means the gradient norm dropped below ``tol``
    or the Newton step became negligible relative to the coefficients; a
    non-converged model is returned flagged and a warning is emitted.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError(f"shape mismatch: X {X.shape}, y {y.shape}")
    if np.unique(y).size < 2:
        raise DataError("logistic regression needs both classes in y")
    if l2_strength < 0:
        raise ValueError("l2_strength must be non-negative")
    n, p = X.shape
    Z = np.hstack([X, np.ones((n, 1))])
    reg = np.full(p + 1, float(l2_strength))
    reg[-1] = 0.0
    theta = np.zeros(p + 1)
    ybar = y.mean()
    theta[-1] = np.log(ybar / (1 - ybar))

    def loss(th):
        return logistic_loss(X, y, th[:-1], th[-1], l2_strength)

    f = loss(theta)
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        mu = expit(Z @ theta)
        grad = Z.T @ (mu - y) + reg * theta
        if np.linalg.norm(grad) < tol:
            converged = True
            it -= 1
            break
        W = mu * (1 - mu)
        H = (Z * W[:, None]).T @ Z + np.diag(reg)
        try:
            c = np.linalg.cholesky(H)
            step = np.linalg.solve(c.T, np.linalg.solve(c, grad))
        except np.linalg.LinAlgError:
            step = grad / (np.linalg.norm(grad) + 1.0)
        else:
            # the loss is flat to rounding here; further line search cannot help
            if np.max(np.abs(step)) <= tol * (1.0 + np.max(np.abs(theta))):
                theta = theta - step
                converged = True
                break
        t = 1.0
        while True:
            cand = theta - t * step
            f_new = loss(cand)
            if f_new <= f - 1e-4 * t * (grad @ step) or t < 1e-10:
                break
            t *= 0.5
        theta, f = cand, f_new
    else:
        mu = expit(Z @ theta)
        converged = np.linalg.norm(Z.T @ (mu - y) + reg * theta) < tol
    if not converged:
        warnings.warn("logistic regression did not converge", ConvergenceWarning)
    return LogisticModel(theta[:-1].copy(), float(theta[-1]), float(l2_strength),
                         bool(converged), it)


def roc_auc(scores, labels) -> float:
    """Mann-Whitney U / (n_pos * n_neg); tied pairs count one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels == 1
    n_pos = int(pos.sum())
    n_neg = labels.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DataError("ROC-AUC needs both classes")
    ranks = rankdata(scores)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def fit_panel_model(train_X, train_y, l2_strength: float = DEFAULT_L2):
    """Standardise on training rows and fit; returns ``(model, means, scales)``."""
    Xs, _, means, scales = standardize_train_apply(train_X)
    return fit_logreg(Xs, train_y, l2_strength), means, scales


def panel_auc(train: ExpressionDataset, test: ExpressionDataset, panel,
              l2_strength: float = DEFAULT_L2) -> float:
    """Train on ``train`` restricted to ``panel`` and score ``test``."""
    panel = np.asarray(panel, dtype=np.int64)
    model, means, scales = fit_panel_model(train.matrix[:, panel], train.labels, l2_strength)
    scores = model.decision_function((test.matrix[:, panel] - means) / scales)
    return roc_auc(scores, test.labels)


def panel_cv_auc(dataset: ExpressionDataset, panel, k: int = 5, seed: int = 0,
                 l2_strength: float = DEFAULT_L2) -> float:
    """Mean held-out AUC of the panel's logistic model over ``k`` stratified folds."""
    panel = np.asarray(sorted(panel), dtype=np.int64)
    if panel.size == 0:
        raise ValueError("panel must be non-empty")
    plan = make_folds(dataset.labels, k, derive_seed(seed, "panel_cv"), stratified=True)
    aucs = []
    for tr, te in plan:
        aucs.append(panel_auc(dataset.rows(tr), dataset.rows(te), panel, l2_strength))
    return float(np.mean(aucs))
