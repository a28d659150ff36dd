import numpy as np
import pytest

from stackfeat_rl.accumulator import Accumulator, dual_select, normalized_estimates
from stackfeat_rl.classifier import panel_cv_auc
from stackfeat_rl.core import make_folds, standardize_train_apply
from stackfeat_rl.enet import PenaltyVector, cv_select_alpha, fit_weighted_enet
from stackfeat_rl.episode import run_iteration
from stackfeat_rl.synth import (SynthSpec, gen_correlated_shadow, gen_linear,
                                gen_sign_inconsistent, read_truth, write_truth)


def absorb_random_splits(ds, n_fits, l1_ratio=1.0, seed=0, alpha=None):
    """Fits at one CV alpha over fresh random 5-fold partitions."""
    X, _, _, _ = standardize_train_apply(ds.matrix)
    y = ds.labels
    if alpha is None:
        alpha, _ = cv_select_alpha(X, y, 5, 100, seed=seed, l1_ratio=l1_ratio)
    acc = Accumulator(ds.n_features)
    pen = PenaltyVector.uniform(alpha, ds.n_features, l1_ratio)
    for r in range(n_fits // 5):
        run_iteration(X, y, make_folds(y, 5, seed * 1000 + r), pen, acc)
    return acc, alpha


def test_deterministic_and_balanced():
    spec = SynthSpec.planted(101, 10, 3, seed=5)
    a, ta = gen_linear(spec)
    b, tb = gen_linear(spec)
    assert np.array_equal(a.matrix, b.matrix) and np.array_equal(a.labels, b.labels)
    assert ta == tb and ta["support"] == [0, 1, 2]
    assert abs(int(a.labels.sum()) - 50) <= 1
    c, _ = gen_linear(SynthSpec.planted(101, 10, 3, seed=6))
    assert not np.array_equal(a.matrix, c.matrix)


def test_spec_validation():
    with pytest.raises(ValueError):
        SynthSpec(10, 3, {5: 1.0})
    with pytest.raises(ValueError):
        SynthSpec(10, 3, {0: 0.0})
    with pytest.raises(ValueError):
        SynthSpec(10, 3, correlated_blocks=[([0, 1], 1.0)])


def test_block_correlation():
    ds, _ = gen_linear(SynthSpec(2000, 6, {0: 1.0}, correlated_blocks=[([1, 2, 3], 0.6)]))
    C = np.corrcoef(ds.matrix, rowvar=False)
    for i, j in [(1, 2), (1, 3), (2, 3)]:
        assert abs(C[i, j] - 0.6) < 0.05
    assert abs(C[0, 1]) < 0.05 and abs(C[4, 5]) < 0.05


def test_truth_roundtrip(tmp_path):
    spec = SynthSpec(50, 8, {1: 2.0}, correlated_blocks=[([2, 3], 0.5)], seed=3)
    _, truth = gen_linear(spec)
    write_truth(tmp_path / "t.json", truth)
    back = read_truth(tmp_path / "t.json")
    assert back == truth
    assert SynthSpec.from_json(back["spec"]) == spec


def test_null_model_auc_near_half():
    vals = []
    for s in range(10):
        ds, _ = gen_linear(SynthSpec(100, 10, {}, seed=s))
        vals.append(panel_cv_auc(ds, [0, 1, 2], 5, seed=s))
    assert abs(np.mean(vals) - 0.5) < 0.08


def test_strong_support_is_predictive():
    ds, truth = gen_linear(SynthSpec.planted(200, 50, 3, 1.5, 0.5, seed=0))
    assert panel_cv_auc(ds, truth["support"], 5, seed=0) > 0.9


def flip_spec(seed, n=200):
    effects = {j: 1.0 * (1 if j % 2 == 0 else -1) for j in range(6)}
    return SynthSpec(n, 10, effects, 1.0, flip_feature=9, flip_source=0, seed=seed)


def test_sign_inconsistent_statistics():
    ds, flip = gen_sign_inconsistent(flip_spec(1))
    acc, _ = absorb_random_splits(ds, 200)
    w, c = normalized_estimates(acc)
    assert c[flip] > 0.5
    assert abs(w[flip]) < 0.2 * abs(w[0])
    # a frequency threshold at 0.5 keeps it, the dual rule does not
    assert flip not in dual_select(acc, 5).tolist()


def test_pure_copy_control_keeps_mean():
    # an unflipped copy standing in for its source carries the source's mean
    for seed in range(3):
        ds, flip = gen_sign_inconsistent(flip_spec(seed))
        acc, _ = absorb_random_splits(ds, 100)
        w, _ = normalized_estimates(acc)
        X = ds.matrix.copy()
        X[:, flip] = X[:, 0] + 0.05 * np.random.default_rng(seed).standard_normal(X.shape[0])
        keep = [j for j in range(ds.n_features) if j != 0]
        sub = ds.__class__(X, ds.labels, ds.feature_names, ds.sample_ids).columns(keep)
        acc2, _ = absorb_random_splits(sub, 100)
        w2, _ = normalized_estimates(acc2)
        copy = w2[keep.index(flip)]
        assert 0.7 < abs(copy) / abs(w[0]) < 1.3
        assert abs(copy) > 5 * abs(w[flip])


def shadow_spec(seed):
    return SynthSpec(200, 50, {0: 1.0, 1: -1.0, 2: 1.0}, 0.5, shadow_feature=49,
                     twin_feature=0, shadow_rho=0.95, seed=seed)


def shadow_signs(ds, j, alpha, n_fits):
    X, _, _, _ = standardize_train_apply(ds.matrix)
    y = ds.labels.astype(float)
    pen = PenaltyVector.uniform(alpha, ds.n_features, 1.0)
    out = []
    for r in range(n_fits // 5):
        for tr, _ in make_folds(ds.labels, 5, r):
            b = fit_weighted_enet(X[tr], y[tr], pen).coefficients[j]
            if b != 0:
                out.append(np.sign(b))
    return np.array(out)


def test_shadow_statistics_and_ablation():
    ds, shadow = gen_correlated_shadow(shadow_spec(2))
    assert np.corrcoef(ds.matrix[:, 0], ds.matrix[:, shadow])[0, 1] > 0.9
    acc, alpha = absorb_random_splits(ds, 200)
    _, c = normalized_estimates(acc)
    assert c[shadow] < 0.5
    assert shadow not in dual_select(acc, 3).tolist()
    signs = shadow_signs(ds, shadow, alpha, 200)
    if signs.size:
        assert max(np.mean(signs > 0), np.mean(signs < 0)) >= 0.95
    # drop the twin: the shadow takes over its role
    keep = [j for j in range(ds.n_features) if j != 0]
    sub = ds.columns(keep)
    acc2, _ = absorb_random_splits(sub, 100)
    _, c2 = normalized_estimates(acc2)
    assert c2[keep.index(shadow)] > 0.9


def test_generators_require_fields():
    with pytest.raises(ValueError):
        gen_sign_inconsistent(SynthSpec(20, 4, {0: 1.0}))
    with pytest.raises(ValueError):
        gen_correlated_shadow(SynthSpec(20, 4, {0: 1.0}, shadow_feature=3, twin_feature=1))
    with pytest.raises(ValueError):
        gen_correlated_shadow(SynthSpec(20, 4, {0: 1.0}, shadow_feature=3, twin_feature=0,
                                        shadow_rho=0.5))
