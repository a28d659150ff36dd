"""Episode driver: the full policy-tuned selection loop for one outer fold."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .accumulator import Accumulator, dual_select, state_matrix
from .classifier import DEFAULT_L2, panel_cv_auc, roc_auc
from .core import (ExpressionDataset, FitCounter, FoldPlan, derive_seed, make_folds,
                   make_rng, standardize_train_apply)
from .enet import (DEFAULT_L1_RATIO, DEFAULT_MAX_ITER, DEFAULT_TOL, PenaltyVector,
                   cv_select_alpha, fit_weighted_enet)
from .policy import (THETA5_MODES, GradientAccumulator, PolicyParams, gene_penalties,
                     grad_log_prob, m_frac, policy_score, update_policy,
                     update_policy_batch)

PENALTY_MODES = ("policy", "uniform")


@dataclass
class EpisodeConfig:
    """Hyperparameters of one outer-fold run.

    ``penalty_mode="uniform"`` ignores the scores and fits every iteration at
    the anchored alpha; ``m_frac_override`` pins the retention fraction.
    ``batch_size > 1`` runs that many episodes at a frozen theta and applies
    their mean update (a variant with averaged learning dynamics).
    """

    episodes: int = 15
    inner_folds: int = 5
    max_iterations: int = 10
    tolerance: float = 0.02
    sparsity_weight: float = 0.001
    learning_rate: float = 0.5
    baseline_decay: float = 0.9
    min_genes: int = 3
    seed: int = 0
    l1_ratio: float = DEFAULT_L1_RATIO
    cv_folds: int = 5
    n_alphas: int = 100
    eps_ratio: float = 1e-3
    reward_folds: int = 5
    l2_strength: float = DEFAULT_L2
    theta5_mode: str = "bias"
    perturb_sd: float = 0.5
    penalty_mode: str = "policy"
    m_frac_override: float | None = None
    batch_size: int = 1
    solver_tol: float = DEFAULT_TOL
    solver_max_iter: int = DEFAULT_MAX_ITER
    stratified: bool = True

    def __post_init__(self):
        if self.episodes < 1:
            raise ValueError("episodes must be >= 1")
        if self.inner_folds < 2:
            raise ValueError("inner_folds must be >= 2")
        if self.max_iterations < 2:
            raise ValueError("max_iterations must be >= 2")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.min_genes < 1:
            raise ValueError("min_genes must be >= 1")
        if self.theta5_mode not in THETA5_MODES:
            raise ValueError(f"theta5_mode must be one of {THETA5_MODES}")
        if self.penalty_mode not in PENALTY_MODES:
            raise ValueError(f"penalty_mode must be one of {PENALTY_MODES}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass
class EpisodeResult:
    episode: int
    panel: np.ndarray
    reward: float
    auc: float
    auc_history: list[float]
    iterations_run: int
    m: int
    m_frac: float
    theta_used: np.ndarray
    gradient: np.ndarray
    fit_count: int
    accumulator: Accumulator = field(repr=False)
    theta_after: np.ndarray | None = None
    baseline_after: float | None = None

    @property
    def psi_snapshot(self) -> dict[tuple[int, int], float]:
        i, j, v = self.accumulator.psi_pairs()
        return {(int(a), int(b)): float(x) for a, b, x in zip(i, j, v)}

    def as_dict(self, feature_names=None) -> dict:
        names = (lambda idx: [feature_names[i] for i in idx]) if feature_names else \
            (lambda idx: [int(i) for i in idx])
        return {
            "episode": self.episode,
            "panel": names(self.panel),
            "reward": self.reward,
            "auc": self.auc,
            "auc_history": list(self.auc_history),
            "iterations": self.iterations_run,
            "m": self.m,
            "m_frac": self.m_frac,
            "theta_used": self.theta_used.tolist(),
            "theta": None if self.theta_after is None else self.theta_after.tolist(),
            "baseline": self.baseline_after,
            "gradient": self.gradient.tolist(),
            "fits": self.fit_count,
        }


@dataclass
class FoldRun:
    panel: np.ndarray
    theta: np.ndarray
    alpha: float
    episodes: list[EpisodeResult]
    counter: FitCounter
    baseline: float

    @property
    def final_accumulator(self) -> Accumulator:
        return self.episodes[-1].accumulator

    @property
    def psi(self) -> dict[tuple[int, int], float]:
        return self.episodes[-1].psi_snapshot

    @property
    def theta_trajectory(self) -> list[list[float]]:
        return [e.theta_after.tolist() for e in self.episodes]


# ---------------------------------------------------------------------------

def check_convergence(auc_history, eps: float) -> bool:
    """True when the last two consecutive AUC differences are both below ``eps``."""
    if len(auc_history) < 3:
        return False
    a, b, c = auc_history[-3:]
    return abs(b - a) < eps and abs(c - b) < eps


def compute_m(genes_per_fold, m_frac_value: float, min_genes: int = 3) -> int:
    if len(genes_per_fold) == 0:
        raise ValueError("genes_per_fold is empty")
    mean = float(np.mean(genes_per_fold))
    return max(int(min_genes), int(math.floor(mean * m_frac_value)))


def anchor_alpha(X, y, config: EpisodeConfig, counter: FitCounter | None = None) -> float:
    """Cross-validated alpha on the standardised outer-training data."""
    alpha, _ = cv_select_alpha(X, y, k_cv=config.cv_folds, n_alphas=config.n_alphas,
                               seed=derive_seed(config.seed, "anchor"),
                               l1_ratio=config.l1_ratio, eps_ratio=config.eps_ratio,
                               tol=config.solver_tol, max_iter=config.solver_max_iter,
                               counter=counter)
    return alpha


def run_iteration(X, y, folds: FoldPlan, penalties: PenaltyVector, acc: Accumulator,
                  counter: FitCounter | None = None, tol: float = DEFAULT_TOL,
                  max_iter: int = DEFAULT_MAX_ITER):
    """Fit every inner fold, absorb the fits, and return the mean held-out AUC
    of the elastic-net predictions."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    yf = y.astype(np.float64)
    aucs = []
    for tr, te in folds:
        fit = fit_weighted_enet(X[tr], yf[tr], penalties, tol=tol, max_iter=max_iter,
                                counter=counter)
        acc.absorb_fit(fit)
        pred = X[te] @ fit.coefficients + fit.intercept
        aucs.append(roc_auc(pred, y[te]))
    return acc, float(np.mean(aucs))


class _Prepared:
    """Outer-training data with its standardised matrix."""

    def __init__(self, train: ExpressionDataset):
        train.require_both_classes()
        self.dataset = train
        self.X, _, _, _ = standardize_train_apply(train.matrix)
        self.y = train.labels
        self.p = train.n_features


def _prepare(train) -> _Prepared:
    return train if isinstance(train, _Prepared) else _Prepared(train)


def run_episode(train, alpha: float, params: PolicyParams, config: EpisodeConfig,
                episode: int = 0, network=None,
                counter: FitCounter | None = None) -> EpisodeResult:
    """One episode: warmup at the anchored alpha, policy iterations until the
    AUC stabilises, dual selection at the episode's retention fraction, and
    the penalised reward.  Does not update ``params``."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    data = _prepare(train)
    p, k = data.p, config.inner_folds
    counter = counter if counter is not None else FitCounter()
    before = counter.single_fits
    theta = params.theta.copy()
    perturb_eps = 0.0
    theta5 = theta[4]
    if config.theta5_mode == "perturb":
        perturb_eps = float(make_rng(config.seed, "episode", episode, "perturb").normal())
        theta5 = theta[4] + config.perturb_sd * perturb_eps
    mf = config.m_frac_override if config.m_frac_override is not None else m_frac(theta5)
    solve = dict(tol=config.solver_tol, max_iter=config.solver_max_iter)

    def folds_for(t):
        return make_folds(data.y, k, derive_seed(config.seed, "episode", episode,
                                                 "iteration", t), config.stratified)

    def select(acc):
        m = min(compute_m(acc.genes_per_fold, mf, config.min_genes), p)
        return dual_select(acc, m), m

    acc = Accumulator(p)
    uniform = PenaltyVector.uniform(alpha, p, config.l1_ratio)
    acc, auc = run_iteration(data.X, data.y, folds_for(1), uniform, acc, counter, **solve)
    history = [auc]
    acc.last_selection, _ = select(acc)
    grad = GradientAccumulator()
    T = 1
    for t in range(2, config.max_iterations + 1):
        states = state_matrix(acc, network)
        z = policy_score(states, theta, config.theta5_mode)
        if config.penalty_mode == "policy":
            pen = gene_penalties(alpha, z, config.l1_ratio)
        else:
            pen = uniform
        acc, auc = run_iteration(data.X, data.y, folds_for(t), pen, acc, counter, **solve)
        T = t
        acc.last_selection, _ = select(acc)
        term = grad_log_prob(acc.last_selection, z, states)
        if config.theta5_mode == "perturb":
            term[4] = 0.0
        grad.add(term)
        history.append(auc)
        if check_convergence(history, config.tolerance):
            break
    g = grad.normalised(p, T)
    if config.theta5_mode == "perturb":
        g[4] = perturb_eps / config.perturb_sd
    panel, m = select(acc)
    if panel.size:
        panel_auc = panel_cv_auc(data.dataset, panel, config.reward_folds,
                                 derive_seed(config.seed, "episode", episode, "reward"),
                                 config.l2_strength)
        reward = panel_auc - config.sparsity_weight * panel.size
    else:
        panel_auc, reward = 0.0, 0.0
    return EpisodeResult(episode, panel, float(reward), float(panel_auc), history, T, m,
                         float(mf), theta, g, counter.single_fits - before, acc)


def run_fold(train: ExpressionDataset, config: EpisodeConfig, network=None,
             counter: FitCounter | None = None,
             params: PolicyParams | None = None) -> FoldRun:
    """Anchor alpha once, then run ``config.episodes`` episodes, updating the
    policy between episodes (or batches of episodes)."""
    data = _prepare(train)
    counter = counter if counter is not None else FitCounter()
    alpha = anchor_alpha(data.X, data.y, config, counter)
    params = params.copy() if params is not None else PolicyParams()
    log: list[EpisodeResult] = []
    e = 0
    while e < config.episodes:
        size = min(config.batch_size, config.episodes - e)
        batch = [run_episode(data, alpha, params, config, e + i, network, counter)
                 for i in range(size)]
        if size == 1:
            params = update_policy(params, batch[0].gradient, batch[0].reward,
                                   config.learning_rate, config.baseline_decay)
        else:
            params = update_policy_batch(params, [r.gradient for r in batch],
                                         [r.reward for r in batch],
                                         config.learning_rate, config.baseline_decay)
        for r in batch:
            r.theta_after = params.theta.copy()
            r.baseline_after = params.baseline
        log.extend(batch)
        e += size
    return FoldRun(log[-1].panel, params.theta.copy(), alpha, log, counter, params.baseline)
