"""Five-parameter REINFORCE policy over per-gene penalties and retention.

Gene ``i`` gets a score ``z_i = theta . s_i`` from its state vector
``s_i = (p_hat, |mu|, n_net, d_cosel, 1)``; its penalty is ``alpha * sigmoid(z_i)``
and ``sigmoid(z_i)`` is read as the probability that the gene is *excluded*.

Two routes give ``theta_5`` a gradient; both are reconstructions:

``"bias"`` (default)
    the constant fifth state component puts ``theta_5`` inside every score, so
    the Bernoulli score-function gradient has a fifth component.
``"perturb"``
    scores use only ``theta_1..theta_4``; each episode draws
    ``theta_5 + sd * eps`` for the retention fraction and contributes the
    Gaussian score-function term ``eps / sd``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .enet import DEFAULT_L1_RATIO, PenaltyVector

THETA5_BOUND = 4.0
M_FRAC_LOW = 0.25
M_FRAC_SPAN = 0.65
THETA5_MODES = ("bias", "perturb")


@dataclass
class PolicyParams:
    theta: np.ndarray = field(default_factory=lambda: np.zeros(5))
    baseline: float = 0.0

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=np.float64).copy()
        if self.theta.shape != (5,):
            raise ValueError("theta must have 5 components")
        if not np.all(np.isfinite(self.theta)) or not np.isfinite(self.baseline):
            raise ValueError("policy parameters must be finite")

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.theta.copy(), self.baseline)


def policy_score(features, theta, mode: str = "bias"):
    """Score for one gene (a :class:`StateFeatures` or 4/5-vector) or many
    genes (an (p, 5) state matrix)."""
    theta = np.asarray(theta, dtype=np.float64)
    if hasattr(features, "as_vector"):
        features = features.as_vector()
    s = np.asarray(features, dtype=np.float64)
    if s.shape[-1] == 4:
        s = np.concatenate([s, np.ones(s.shape[:-1] + (1,))], axis=-1)
    th = theta if mode == "bias" else np.append(theta[:4], 0.0)
    z = s @ th
    return float(z) if np.ndim(z) == 0 else z


def gene_penalties(alpha: float, scores, l1_ratio: float = DEFAULT_L1_RATIO) -> PenaltyVector:
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    return PenaltyVector(alpha * expit(np.asarray(scores, dtype=np.float64)), l1_ratio)


def m_frac(theta5: float) -> float:
    """Retention fraction ``0.25 + 0.65 * sigmoid(theta5)``."""
    return M_FRAC_LOW + M_FRAC_SPAN * float(expit(theta5))


def grad_log_prob(selected, scores, state_vectors) -> np.ndarray:
    """``sum_i (1[i not selected] - sigmoid(z_i)) * s_i``."""
    scores = np.asarray(scores, dtype=np.float64)
    S = np.asarray(state_vectors, dtype=np.float64)
    excluded = np.ones(scores.size)
    excluded[np.asarray(selected, dtype=np.int64)] = 0.0
    return (excluded - expit(scores)) @ S


def log_prob(selected, scores) -> float:
    """Log-likelihood of the outcome under independent exclusion draws."""
    scores = np.asarray(scores, dtype=np.float64)
    excluded = np.ones(scores.size, dtype=bool)
    excluded[np.asarray(selected, dtype=np.int64)] = False
    # log sigmoid(z) for excluded genes, log(1 - sigmoid(z)) for selected ones
    return float(-np.logaddexp(0.0, -scores[excluded]).sum()
                 - np.logaddexp(0.0, scores[~excluded]).sum())


class GradientAccumulator:
    def __init__(self):
        self.g = np.zeros(5)
        self.terms_absorbed = 0

    def add(self, term):
        self.g += term
        self.terms_absorbed += 1

    def normalised(self, n_features: int, n_iterations: int) -> np.ndarray:
        """Divide by ``p * (T - 1)``; ``T`` counts the warmup iteration."""
        denom = n_features * max(n_iterations - 1, 1)
        return self.g / denom


def clip_theta(theta: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64).copy()
    theta[4] = np.clip(theta[4], -THETA5_BOUND, THETA5_BOUND)
    return theta


def update_policy(params: PolicyParams, grad, reward: float, lr: float,
                  baseline_decay: float) -> PolicyParams:
    """Baseline first, then the REINFORCE step; only ``theta_5`` is clipped."""
    b = baseline_decay * params.baseline + (1.0 - baseline_decay) * reward
    theta = params.theta + lr * (reward - b) * np.asarray(grad, dtype=np.float64)
    return PolicyParams(clip_theta(theta), b)


def update_policy_batch(params: PolicyParams, grads, rewards, lr: float,
                        baseline_decay: float) -> PolicyParams:
    """Mean update over episodes run at the same frozen ``theta``.

    The baseline still moves once per reward (in episode order); each
    episode's advantage uses the baseline value right after its own reward.
    """
    b = params.baseline
    step = np.zeros(5)
    for g, r in zip(grads, rewards):
        b = baseline_decay * b + (1.0 - baseline_decay) * r
        step += (r - b) * np.asarray(g, dtype=np.float64)
    step /= max(len(rewards), 1)
    return PolicyParams(clip_theta(params.theta + lr * step), b)
