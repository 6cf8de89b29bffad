import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transell.exceptions import InvalidLambda, NotConverged
from transell.glasso import (
    SolverConfig,
    gaussian_loglik,
    glasso_fit,
    glasso_kkt_residual,
    graph_mle,
    lambda_path,
    offdiag_max,
)

from conftest import random_corr

S4 = np.array([[1.0, 0.5, 0.3, -0.2], [0.5, 1.0, 0.4, 0.1], [0.3, 0.4, 1.0, 0.25], [-0.2, 0.1, 0.25, 1.0]])
# optimal penalized objective from an interior-point conic solver (gap 1e-12)
S4_OBJECTIVE = {0.1: -3.681996167661831, 0.3: -3.9491276696283624}


def penalized(k, s, lam):
    off = ~np.eye(len(s), dtype=bool)
    return np.linalg.slogdet(k)[1] - np.sum(s * k) - lam * np.abs(k[off]).sum()


@pytest.mark.parametrize("lam", sorted(S4_OBJECTIVE))
def test_objective_matches_conic_solver(lam):
    fit = glasso_fit(S4, lam)
    assert penalized(fit.precision.array, S4, lam) == pytest.approx(S4_OBJECTIVE[lam], abs=1e-9)
    assert fit.duality_gap < 1e-6


def test_identity_input():
    for lam in (0.0, 0.2, 5.0):
        np.testing.assert_allclose(glasso_fit(np.eye(4), lam).precision.array, np.eye(4), atol=1e-15)


def test_lambda_zero_is_inverse():
    fit = glasso_fit(S4, 0.0)
    np.testing.assert_allclose(fit.precision.array, np.linalg.inv(S4), atol=1e-6)


def test_lambda_max_gives_diagonal():
    s = random_corr(np.random.default_rng(3), 8)
    fit = glasso_fit(s, offdiag_max(s))
    k = fit.precision.array
    assert np.all(k[~np.eye(8, dtype=bool)] == 0.0)
    np.testing.assert_allclose(np.diag(k), 1.0 / np.diag(s), rtol=1e-12)
    assert fit.edge_count() == 0


def test_covariance_input_keeps_diagonal():
    s = np.diag([2.0, 0.5, 3.0]) @ S4[:3, :3] @ np.diag([2.0, 0.5, 3.0])
    fit = glasso_fit(s, 0.05)
    np.testing.assert_allclose(np.diag(fit.covariance.array), np.diag(s), rtol=1e-9)


def test_invalid_lambda():
    with pytest.raises(InvalidLambda):
        glasso_fit(S4, -0.1)
    with pytest.raises(InvalidLambda):
        glasso_fit(S4, float("nan"))


def test_not_converged_reports_iterations():
    with pytest.raises(NotConverged) as info:
        glasso_fit(random_corr(np.random.default_rng(1), 10), 0.01, SolverConfig(max_iter=1))
    assert info.value.iterations == 1


def test_lambda_path_examples():
    s = np.array([[1.0, 0.8, 0.1], [0.8, 1.0, -0.3], [0.1, -0.3, 1.0]])
    np.testing.assert_allclose(lambda_path(s, 2), [0.8, 0.008], rtol=1e-15)
    path = np.array(lambda_path(s, 30))
    assert len(path) == 30 and np.all(np.diff(path) < 0)
    ratios = path[1:] / path[:-1]
    assert np.ptp(ratios) < 1e-12


def test_dual_objective_history_monotone():
    s = random_corr(np.random.default_rng(7), 15)
    fit = glasso_fit(s, 0.05)
    hist = np.array(fit.history)
    assert np.all(np.diff(hist) >= -1e-12)


def test_warm_start_reaches_same_solution():
    s = random_corr(np.random.default_rng(8), 12)
    cold = glasso_fit(s, 0.05)
    warm = glasso_fit(s, 0.05, warm_start=glasso_fit(s, 0.1))
    np.testing.assert_allclose(warm.precision.array, cold.precision.array, atol=1e-5)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 20), st.floats(0.0, 1.0))
def test_kkt_certificate(seed, d, frac):
    s = random_corr(np.random.default_rng(seed), d)
    lam = frac * offdiag_max(s)
    fit = glasso_fit(s, lam)
    assert glasso_kkt_residual(fit, s) <= 1e-5
    w = np.linalg.inv(fit.precision.array)
    k = fit.precision.array
    off = ~np.eye(d, dtype=bool)
    nz = off & (np.abs(k) > 1e-8)
    # sign convention of the stationarity condition: W - S = +lam * sign(K)
    np.testing.assert_allclose((w - s)[nz], lam * np.sign(k[nz]), atol=1e-5)
    assert np.all(np.abs((w - s)[off & ~nz]) <= lam + 1e-5)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 15))
def test_l1_norm_monotone_along_path(seed, d):
    s = random_corr(np.random.default_rng(seed), d)
    off = ~np.eye(d, dtype=bool)
    prev, norms = None, []
    for lam in lambda_path(s, 12):
        prev = glasso_fit(s, lam, warm_start=prev)
        norms.append(np.abs(prev.precision.array[off]).sum())
    assert all(a <= b + 1e-6 * (1 + b) for a, b in zip(norms, norms[1:]))


def test_edge_count_can_rise_with_lambda():
    # support is not nested along the path; counts confirmed by a conic solver
    s = random_corr(np.random.default_rng(0), 5)
    path = lambda_path(s, 12)
    prev, counts = None, []
    for lam in path:
        prev = glasso_fit(s, lam, warm_start=prev)
        counts.append(prev.edge_count())
    assert counts[8:] == [10, 9, 8, 9]


def test_graph_mle_full_support_is_inverse():
    s = random_corr(np.random.default_rng(4), 6)
    np.testing.assert_allclose(graph_mle(s, np.ones((6, 6), bool)).array, np.linalg.inv(s), atol=1e-9)


def test_graph_mle_matches_moments_on_support():
    s = random_corr(np.random.default_rng(5), 6)
    support = np.zeros((6, 6), bool)
    for i in range(5):
        support[i, i + 1] = True
    k = graph_mle(s, support).array
    band = support | support.T | np.eye(6, dtype=bool)
    np.testing.assert_allclose(np.linalg.inv(k)[band], s[band], atol=1e-8)
    assert np.all(k[~band] == 0.0)
    # and it beats the glasso fit with the same zero pattern on unpenalized likelihood
    assert gaussian_loglik(k, s) >= gaussian_loglik(glasso_fit(s, 0.0).precision, s) - 10.0
