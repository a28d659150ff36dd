import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from stackfeat_rl.core import FitCounter, standardize_train_apply
from stackfeat_rl.enet import (PenaltyVector, alpha_max, cv_select_alpha, fit_enet, fit_path,
                               fit_weighted_enet, make_alpha_grid, penalised_objective,
                               soft_threshold, write_cv_curve)
from stackfeat_rl.synth import SynthSpec, gen_linear


def prox_grad_oracle(X, y, lam, rho, tol=1e-10, max_iter=200000):
    """Accelerated proximal gradient on centred data, independent of the CD code."""
    Xc = X - X.mean(0)
    yc = y - y.mean()
    n, p = X.shape
    l1 = lam * rho
    l2 = lam * (1 - rho)
    L = np.linalg.eigvalsh(Xc.T @ Xc / n).max() + l2.max()
    step = 1.0 / L
    b = np.zeros(p)
    z = b.copy()
    t = 1.0
    for _ in range(max_iter):
        grad = -Xc.T @ (yc - Xc @ z) / n + l2 * z
        u = z - step * grad
        b_new = np.sign(u) * np.maximum(np.abs(u) - step * l1, 0)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        z = b_new + (t - 1) / t_new * (b_new - b)
        if np.max(np.abs(b_new - b)) < tol:
            b = b_new
            break
        b, t = b_new, t_new
    return b, y.mean() - X.mean(0) @ b


def random_instance(rng, n=None, p=None):
    n = n or int(rng.integers(15, 60))
    p = p or int(rng.integers(2, 25))
    X, _, _, _ = standardize_train_apply(rng.normal(size=(n, p)))
    beta = rng.normal(size=p) * (rng.random(p) < 0.4)
    y = X @ beta + rng.normal(size=n)
    amax = alpha_max(X, y, 1.0)
    lam = amax * rng.uniform(0.01, 0.6) * rng.uniform(0.2, 1.0, size=p)
    return X, y, lam, float(rng.choice([0.3, 0.5, 0.8, 1.0]))


def test_soft_threshold_values():
    assert soft_threshold(3.0, 1.0) == 2.0
    assert soft_threshold(0.5, 1.0) == 0.0
    assert soft_threshold(-3.0, 1.0) == -2.0
    with pytest.raises(ValueError):
        soft_threshold(1.0, -0.1)


def test_penalty_vector_validation():
    with pytest.raises(ValueError):
        PenaltyVector(np.array([0.1, -1.0]))
    with pytest.raises(ValueError):
        PenaltyVector(np.array([0.1]), l1_ratio=0.0)


def test_full_shrinkage_gives_zero_and_mean_intercept(rng):
    X, _, _, _ = standardize_train_apply(rng.normal(size=(30, 5)))
    y = rng.normal(size=30) + 4
    amax = alpha_max(X, y, 0.5)
    fit = fit_enet(X, y, amax, 0.5)
    assert fit.selected.size == 0
    assert fit.intercept == pytest.approx(y.mean())


def test_least_squares_at_zero_penalty(rng):
    X = rng.normal(size=(10, 3))
    y = X @ np.array([1.0, -2.0, 0.5]) + 0.3 + 0.1 * rng.normal(size=10)
    fit = fit_weighted_enet(X, y, PenaltyVector(np.zeros(3)), tol=1e-12, max_iter=100000)
    Z = np.column_stack([X, np.ones(10)])
    ls = np.linalg.solve(Z.T @ Z, Z.T @ y)
    assert np.allclose(fit.coefficients, ls[:3], atol=1e-8)
    assert fit.intercept == pytest.approx(ls[3], abs=1e-8)


@pytest.mark.parametrize("lam", [0.0, 0.05, 0.3, 2.0])
def test_univariate_lasso_closed_form(rng, lam):
    x = rng.normal(size=40)
    x = (x - x.mean()) / x.std()
    y = 0.7 * x + rng.normal(size=40)
    fit = fit_weighted_enet(x[:, None], y, PenaltyVector(np.array([lam]), 1.0), tol=1e-12)
    expected = soft_threshold(x @ (y - y.mean()) / 40, lam)
    assert fit.coefficients[0] == pytest.approx(expected, abs=1e-12)


def kkt_violation(X, y, fit, lam, rho):
    n = X.shape[0]
    r = y - X @ fit.coefficients - fit.intercept
    grad = -X.T @ r / n
    b = fit.coefficients
    active = b != 0
    v_act = np.abs(grad + lam * rho * np.sign(b) + lam * (1 - rho) * b)[active]
    v_in = (np.abs(grad) - lam * rho)[~active]
    return max(v_act.max(initial=0.0), v_in.max(initial=0.0))


def test_kkt_on_random_instances():
    rng = np.random.default_rng(2024)
    tol = 1e-4
    for _ in range(100):
        X, y, lam, rho = random_instance(rng)
        fit = fit_weighted_enet(X, y, PenaltyVector(lam, rho), tol=tol)
        assert fit.converged
        assert kkt_violation(X, y, fit, lam, rho) <= 10 * tol


def test_objective_gap_against_proximal_oracle():
    rng = np.random.default_rng(77)
    for _ in range(25):
        X, y, lam, rho = random_instance(rng)
        pen = PenaltyVector(lam, rho)
        fit = fit_weighted_enet(X, y, pen)
        b, b0 = prox_grad_oracle(X, y, lam, rho)
        f_cd = penalised_objective(X, y, fit.coefficients, fit.intercept, pen)
        f_or = penalised_objective(X, y, b, b0, pen)
        assert (f_cd - f_or) / abs(f_or) < 1e-6


def test_objective_never_increases_in_debug_mode():
    rng = np.random.default_rng(5)
    for _ in range(20):
        X, y, lam, rho = random_instance(rng)
        fit_weighted_enet(X, y, PenaltyVector(lam, rho), debug=True)


def test_uniform_vector_equals_scalar_path(rng):
    X, y, _, _ = random_instance(rng, 40, 8)
    a = 0.3 * alpha_max(X, y)
    f1 = fit_weighted_enet(X, y, PenaltyVector.uniform(a, 8))
    f2 = fit_enet(X, y, a)
    coefs, _ = fit_path(X, y, [a])
    assert np.allclose(f1.coefficients, f2.coefficients)
    assert np.allclose(f1.coefficients, coefs[0], atol=1e-4)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_column_permutation_equivariance(seed):
    rng = np.random.default_rng(seed)
    X, y, lam, rho = random_instance(rng)
    perm = rng.permutation(X.shape[1])
    a = fit_weighted_enet(X, y, PenaltyVector(lam, rho), tol=1e-10, max_iter=20000)
    b = fit_weighted_enet(X[:, perm], y, PenaltyVector(lam[perm], rho), tol=1e-10,
                          max_iter=20000)
    assert np.allclose(a.coefficients[perm], b.coefficients, atol=1e-7)


def test_max_iter_reached_is_flagged(rng):
    X, y, lam, rho = random_instance(rng, 50, 20)
    fit = fit_weighted_enet(X, y, PenaltyVector(lam * 0.01, rho), tol=1e-14, max_iter=2)
    assert not fit.converged and fit.n_iterations == 2


def test_dimension_mismatch(rng):
    with pytest.raises(ValueError):
        fit_weighted_enet(np.zeros((5, 3)), np.zeros(5), PenaltyVector(np.ones(2)))


def test_fit_counts_one(rng):
    c = FitCounter()
    X, y, lam, rho = random_instance(rng)
    fit_weighted_enet(X, y, PenaltyVector(lam, rho), counter=c)
    assert c.single_fits == 1 and c.cv_fits == 0


# -- grid and CV ------------------------------------------------------------

def test_grid_shape_and_endpoints(rng):
    X, y, _, _ = random_instance(rng, 40, 10)
    g = make_alpha_grid(X, y, 100, 1e-3, 0.5)
    assert g.values.size == 100
    assert np.all(np.diff(g.values) < 0)
    ratios = g.values[1:] / g.values[:-1]
    assert np.allclose(ratios, ratios[0])
    assert g.values[0] == g.alpha_max
    assert g.values[-1] == pytest.approx(1e-3 * g.alpha_max, rel=1e-12)
    assert make_alpha_grid(X, y, 1).values.tolist() == [g.alpha_max]


def test_fit_at_alpha_max_is_zero(rng):
    for _ in range(10):
        X, y, _, _ = random_instance(rng)
        amax = make_alpha_grid(X, y, 10, 1e-3, 0.5).alpha_max
        assert fit_enet(X, y, amax, 0.5).selected.size == 0
        # just below the boundary the most correlated feature enters
        assert fit_enet(X, y, amax * 0.99, 0.5).selected.size >= 1


def test_grid_rejects_zero_design():
    with pytest.raises(ValueError):
        make_alpha_grid(np.zeros((5, 2)), np.arange(5.0))


def test_cv_counts_exactly(planted_small):
    ds, _ = planted_small
    X, _, _, _ = standardize_train_apply(ds.matrix)
    c = FitCounter()
    alpha, curve = cv_select_alpha(X, ds.labels.astype(float), 5, 100, seed=1, counter=c)
    assert c.cv_fits == 500 and c.single_fits == 0
    assert curve.alphas.size == 100
    assert alpha == curve.alphas[np.argmin(curve.mean_mse)]


def test_cv_tie_prefers_larger_alpha():
    # y constant within every training fold's reach: all-zero fits tie everywhere
    rng = np.random.default_rng(0)
    X = rng.normal(size=(20, 3))
    y = np.zeros(20)
    y[0] = 1e-300
    alpha, curve = cv_select_alpha(X, y, 4, 10)
    assert alpha == curve.alphas[0]


def test_cv_pure_noise_is_sparse():
    hits = 0
    for s in range(10):
        rng = np.random.default_rng(100 + s)
        X, _, _, _ = standardize_train_apply(rng.normal(size=(100, 30)))
        y = (rng.random(100) < 0.5).astype(float)
        alpha, curve = cv_select_alpha(X, y, 5, 100, seed=s)
        hits += alpha >= curve.alphas[9]
    assert hits >= 8


def test_cv_recovers_planted_support():
    ds, truth = gen_linear(SynthSpec.planted(150, 30, 3, 2.0, 0.3, seed=4))
    X, _, _, _ = standardize_train_apply(ds.matrix)
    y = ds.labels.astype(float)
    alpha, _ = cv_select_alpha(X, y, 5, 100, seed=0)
    fit = fit_enet(X, y, alpha)
    assert set(truth["support"]) <= set(fit.selected.tolist())


def test_cv_deterministic_and_curve_dump(tmp_path, planted_small):
    ds, _ = planted_small
    X, _, _, _ = standardize_train_apply(ds.matrix)
    a1, c1 = cv_select_alpha(X, ds.labels, seed=9)
    a2, c2 = cv_select_alpha(X, ds.labels, seed=9)
    assert a1 == a2 and np.array_equal(c1.mean_mse, c2.mean_mse)
    write_cv_curve(tmp_path / "cv.csv", c1)
    lines = (tmp_path / "cv.csv").read_text().splitlines()
    assert lines[0] == "alpha,mean_mse" and len(lines) == 101


def test_cv_rejects_single_fold():
    with pytest.raises(ValueError):
        cv_select_alpha(np.eye(4), np.arange(4.0), k_cv=1)
