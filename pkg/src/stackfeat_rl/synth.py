"""Synthetic datasets with known ground truth.

Latent score ``X @ beta + noise``; labels are ``1[score > median]`` so the
classes are balanced.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import ExpressionDataset, make_rng


@dataclass
class SynthSpec:
    n_samples: int = 200
    n_features: int = 50
    effects: dict[int, float] = field(default_factory=dict)
    noise_sd: float = 0.5
    correlated_blocks: list[tuple[list[int], float]] = field(default_factory=list)
    flip_feature: int | None = None
    flip_source: int | None = None
    flip_noise_sd: float = 0.05
    shadow_feature: int | None = None
    twin_feature: int | None = None
    shadow_rho: float = 0.95
    seed: int = 0

    def __post_init__(self):
        self.effects = {int(k): float(v) for k, v in self.effects.items()}
        for j, b in self.effects.items():
            if not 0 <= j < self.n_features:
                raise ValueError(f"support index {j} out of range")
            if b == 0:
                raise ValueError("effect sizes must be nonzero")
        self.correlated_blocks = [(list(map(int, idx)), float(rho))
                                  for idx, rho in self.correlated_blocks]
        for idx, rho in self.correlated_blocks:
            if not 0.0 <= rho < 1.0:
                raise ValueError("block correlation must lie in [0, 1)")

    @classmethod
    def planted(cls, n_samples=200, n_features=100, n_true=5, effect=1.0,
                noise_sd=1.0, seed=0, **kw) -> "SynthSpec":
        """``n_true`` planted features at indices 0..n_true-1 with alternating
        signs of magnitude ``effect``."""
        effects = {j: effect * (1 if j % 2 == 0 else -1) for j in range(n_true)}
        return cls(n_samples, n_features, effects, noise_sd, seed=seed, **kw)

    def to_json(self) -> dict:
        d = asdict(self)
        d["effects"] = {str(k): v for k, v in self.effects.items()}
        d["correlated_blocks"] = [[idx, rho] for idx, rho in self.correlated_blocks]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "SynthSpec":
        d = dict(d)
        d["effects"] = {int(k): v for k, v in d.get("effects", {}).items()}
        d["correlated_blocks"] = [(idx, rho) for idx, rho in d.get("correlated_blocks", [])]
        return cls(**d)


def _design(spec: SynthSpec, rng) -> np.ndarray:
    X = rng.standard_normal((spec.n_samples, spec.n_features))
    for idx, rho in spec.correlated_blocks:
        common = rng.standard_normal(spec.n_samples)
        X[:, idx] = np.sqrt(rho) * common[:, None] + np.sqrt(1 - rho) * X[:, idx]
    return X


def _labels(X, beta, spec: SynthSpec, rng) -> np.ndarray:
    score = X @ beta + spec.noise_sd * rng.standard_normal(spec.n_samples)
    return (score > np.median(score)).astype(np.int64)


def _dataset(X, y, prefix="f") -> ExpressionDataset:
    n, p = X.shape
    width = len(str(p - 1))
    return ExpressionDataset(X, y, [f"{prefix}{j:0{width}d}" for j in range(p)],
                             [f"s{i:04d}" for i in range(n)])


def _beta(spec: SynthSpec) -> np.ndarray:
    beta = np.zeros(spec.n_features)
    for j, b in spec.effects.items():
        beta[j] = b
    return beta


def gen_linear(spec: SynthSpec):
    """Returns ``(dataset, truth)`` where ``truth`` holds ``beta`` and the support."""
    rng = make_rng(spec.seed, "synth", "linear")
    X = _design(spec, rng)
    beta = _beta(spec)
    y = _labels(X, beta, spec, rng)
    truth = {"kind": "linear", "beta": beta.tolist(),
             "support": sorted(spec.effects), "spec": spec.to_json()}
    return _dataset(X, y), truth


def gen_sign_inconsistent(spec: SynthSpec):
    """Planted model plus a column that copies a true feature with its sign
    flipped on a random half of the samples.

    The flip pattern is balanced against the source feature's label
    association: samples are paired by ``x_source * (y - ybar)`` and each pair
    receives opposite signs, so the column's overall association with the
    labels cancels while every training subset leaves a residual association
    of random sign.  Returns ``(dataset, flip_index)``.
    """
    if spec.flip_feature is None:
        raise ValueError("flip_feature must be set")
    src = spec.flip_source if spec.flip_source is not None else min(spec.effects)
    if src not in spec.effects or src == spec.flip_feature:
        raise ValueError("flip_source must be a planted feature distinct from flip_feature")
    rng = make_rng(spec.seed, "synth", "flip")
    X = _design(spec, rng)
    beta = _beta(spec)
    beta[spec.flip_feature] = 0.0
    y = _labels(X, beta, spec, rng)
    contrib = X[:, src] * (y - y.mean())
    order = np.argsort(contrib, kind="stable")
    signs = np.empty(spec.n_samples)
    half = rng.integers(0, 2, size=(spec.n_samples + 1) // 2) * 2 - 1
    signs[order[0::2]] = half[: order[0::2].size]
    signs[order[1::2]] = -half[: order[1::2].size]
    X[:, spec.flip_feature] = signs * X[:, src] + \
        spec.flip_noise_sd * rng.standard_normal(spec.n_samples)
    return _dataset(X, y), int(spec.flip_feature)


def gen_correlated_shadow(spec: SynthSpec):
    """A planted ``twin`` feature and a ``shadow`` with correlation
    ``shadow_rho`` to it that carries no effect of its own.  Returns
    ``(dataset, shadow_index)``."""
    if spec.shadow_feature is None or spec.twin_feature is None:
        raise ValueError("shadow_feature and twin_feature must be set")
    if spec.twin_feature not in spec.effects:
        raise ValueError("twin_feature must carry a planted effect")
    if spec.shadow_rho < 0.95 or spec.shadow_rho >= 1:
        raise ValueError("shadow_rho must lie in [0.95, 1)")
    rng = make_rng(spec.seed, "synth", "shadow")
    X = _design(spec, rng)
    beta = _beta(spec)
    beta[spec.shadow_feature] = 0.0
    y = _labels(X, beta, spec, rng)
    rho = spec.shadow_rho
    twin = X[:, spec.twin_feature]
    # private part orthogonal (in sample) to the labels and the twin, so the
    # shadow's label association is exactly rho times the twin's
    basis = np.column_stack([np.ones(spec.n_samples), y, twin])
    u = rng.standard_normal(spec.n_samples)
    u -= basis @ np.linalg.lstsq(basis, u, rcond=None)[0]
    u *= np.std(twin) / np.std(u)
    X[:, spec.shadow_feature] = rho * twin + np.sqrt(1 - rho ** 2) * u
    return _dataset(X, y), int(spec.shadow_feature)


def write_truth(path, truth: dict):
    Path(path).write_text(json.dumps(truth, indent=2, sort_keys=True) + "\n")


def read_truth(path) -> dict:
    return json.loads(Path(path).read_text())
