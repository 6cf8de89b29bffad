from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize_scalar

from transell.exceptions import InfeasibleInput
from transell.glasso import gaussian_loglik
from transell.matrix_core import m_matrix_certificate, schur_complement
from transell.positive_mle import kkt_residual, ppg_fit, ppg_graph, random_m_matrix

from conftest import random_corr, random_spd

S4 = np.array([[1.0, 0.5, 0.3, -0.2], [0.5, 1.0, 0.4, 0.1], [0.3, 0.4, 1.0, 0.25], [-0.2, 0.1, 0.25, 1.0]])
# conic solver optimum (gap 1e-13) and its support
S4_LOGLIK = -3.457425677919439
S4_EDGES = {(0, 1), (0, 2), (1, 2), (2, 3)}


def check_kkt(fit, s, tol=1e-6):
    sig, k = fit.covariance.array, fit.precision.array
    off = ~np.eye(len(s), dtype=bool)
    assert np.all(k[off] <= 1e-9)
    np.testing.assert_allclose(np.diag(sig), np.diag(s), atol=1e-7)
    assert np.all(sig[off] >= s[off] - 1e-7)
    assert np.max(np.abs((sig - s)[off] * k[off])) <= tol


def test_matches_conic_solver():
    fit = ppg_fit(S4)
    assert fit.loglik == pytest.approx(S4_LOGLIK, abs=1e-8)
    assert ppg_graph(fit).edge_set() == S4_EDGES
    check_kkt(fit, S4)


def test_inverse_already_m_matrix(m_matrix):
    k = m_matrix(6, seed=2)
    s = np.linalg.inv(k)
    np.testing.assert_allclose(ppg_fit(s).precision.array, k, atol=1e-6)


def _profile_2x2(s12):
    # one free parameter Sigma_12 in [0, 1); K_12 <= 0 <=> Sigma_12 >= 0
    def neg(x):
        sig = np.array([[1.0, x], [x, 1.0]])
        k = np.linalg.inv(sig)
        return -(np.linalg.slogdet(k)[1] - np.sum(np.array([[1.0, s12], [s12, 1.0]]) * k))

    res = minimize_scalar(neg, bounds=(0.0, 0.999), method="bounded", options={"xatol": 1e-10})
    return res.x


def test_two_by_two_negative_correlation():
    fit = ppg_fit(np.array([[1.0, -0.4], [-0.4, 1.0]]))
    assert _profile_2x2(-0.4) == pytest.approx(0.0, abs=1e-6)
    np.testing.assert_allclose(fit.covariance.array, np.eye(2), atol=1e-6)
    np.testing.assert_allclose(fit.precision.array, np.eye(2), atol=1e-6)


def test_two_by_two_positive_correlation():
    s = np.array([[1.0, 0.4], [0.4, 1.0]])
    fit = ppg_fit(s)
    assert _profile_2x2(0.4) == pytest.approx(0.4, abs=1e-6)
    np.testing.assert_allclose(fit.precision.array, np.linalg.inv(s), atol=1e-6)


def test_infeasible_input():
    with pytest.raises(InfeasibleInput):
        ppg_fit(np.array([[1.0, 0.1], [0.1, 0.0]]))
    with pytest.raises(InfeasibleInput):
        ppg_fit(np.array([[-1.0, 0.1], [0.1, 1.0]]))


def test_singular_sample_covariance():
    x = np.random.default_rng(1).standard_normal((3, 6))
    s = np.cov(x.T, bias=True)
    assert np.linalg.matrix_rank(s) < 6
    fit = ppg_fit(s)
    check_kkt(fit, s)
    assert fit.kkt_residual < 1e-6


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8))
def test_kkt_and_dominance(seed, d):
    rng = np.random.default_rng(seed)
    s = random_spd(rng, d)
    fit = ppg_fit(s)
    check_kkt(fit, s)
    assert kkt_residual(fit.covariance.array, fit.precision.array, s) < 1e-6
    best = fit.loglik
    for _ in range(100):
        k = random_m_matrix(d, rng, density=rng.uniform(0.2, 1.0), strength=rng.uniform(0.3, 0.99))
        scale = np.exp(rng.normal(0.0, 0.5, d))
        assert gaussian_loglik(k * scale[:, None] * scale[None, :], s) <= best + 1e-9


def test_closure_of_conditionals_and_marginals():
    s = random_corr(np.random.default_rng(11), 6)
    fit = ppg_fit(s)
    k, sig = fit.precision.array, fit.covariance.array
    for r in range(1, 6):
        for keep in combinations(range(6), r):
            out = [i for i in range(6) if i not in keep]
            assert m_matrix_certificate(k[np.ix_(keep, keep)]).is_m_matrix
            marginal = schur_complement(k, list(keep), out).array if out else k
            assert m_matrix_certificate(marginal).is_m_matrix
            np.testing.assert_allclose(np.linalg.inv(marginal), sig[np.ix_(keep, keep)], atol=1e-8)


def test_conditional_correlations_nonnegative():
    s = random_corr(np.random.default_rng(12), 6)
    sig = ppg_fit(s).covariance.array
    for i, j in combinations(range(6), 2):
        rest = [c for c in range(6) if c not in (i, j)]
        for r in range(len(rest) + 1):
            for cond in combinations(rest, r):
                c = schur_complement(sig, [i, j], list(cond)).array if cond else sig[np.ix_([i, j], [i, j])]
                assert c[0, 1] / np.sqrt(c[0, 0] * c[1, 1]) >= -1e-8


def test_graph_examples():
    assert ppg_graph(np.eye(3)).edges == ()
    g = ppg_graph(np.array([[1.0, -0.3], [-0.3, 1.0]]))
    assert g.edges == ((0, 1, pytest.approx(0.3)),)


def test_graph_weights_recomputed(m_matrix):
    k = m_matrix(7, seed=4)
    fit = ppg_fit(np.linalg.inv(k))
    kh = fit.precision.array
    for i, j, w in ppg_graph(fit).edges:
        assert 0.0 <= w < 1.0
        assert w == pytest.approx(-kh[i, j] / np.sqrt(kh[i, i] * kh[j, j]), rel=1e-12)
