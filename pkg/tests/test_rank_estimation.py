from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from transell.exceptions import DegenerateColumn
from transell.rank_estimation import kendall_matrix, kendall_tau_fast, skeptic_correlation, tau_b_from_counts
from transell.sampling import ChiSqOverK, EllipticalSpec, TransellipticalSpec, sample_elliptical, sample_transelliptical


def brute_force_counts(x, y):
    """O(n^2) pair counts: (n0, ties in x, ties in y, ties in both, concordant, discordant)."""
    n = len(x)
    n1 = n2 = n3 = conc = disc = 0
    for i in range(n):
        for j in range(i + 1, n):
            dx = np.sign(x[i] - x[j])
            dy = np.sign(y[i] - y[j])
            n1 += dx == 0
            n2 += dy == 0
            n3 += dx == 0 and dy == 0
            conc += dx * dy > 0
            disc += dx * dy < 0
    return n * (n - 1) // 2, n1, n2, n3, conc, disc


def brute_force_tau_b(x, y):
    n0, n1, n2, _, conc, disc = brute_force_counts(x, y)
    return Fraction(int(conc - disc)), (n0 - n1) * (n0 - n2)


def test_trivial_examples():
    assert kendall_tau_fast([1, 2, 3], [1, 2, 3]) == 1.0
    assert kendall_tau_fast([1, 2, 3], [3, 2, 1]) == -1.0


def test_degenerate_column():
    with pytest.raises(DegenerateColumn) as info:
        kendall_tau_fast([1.0, 2.0, 3.0], [2.0, 2.0, 2.0])
    assert info.value.index == 1
    with pytest.raises(DegenerateColumn):
        kendall_matrix(np.column_stack([np.arange(5.0), np.ones(5)]))


def test_nan_rejected():
    with pytest.raises(ValueError):
        kendall_tau_fast([1.0, np.nan, 3.0], [1.0, 2.0, 3.0])


def test_counts_formula_matches_brute_force():
    rng = np.random.default_rng(0)
    x = rng.integers(0, 6, 60)
    y = rng.integers(0, 4, 60)
    n0, n1, n2, n3, conc, disc = brute_force_counts(x, y)
    num, den = brute_force_tau_b(x, y)
    assert tau_b_from_counts(n0, n1, n2, n3, disc) == pytest.approx(float(num) / np.sqrt(den), abs=1e-15)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 120), st.sampled_from([None, 3, 10]))
def test_fast_equals_quadratic_definition(seed, n, levels):
    rng = np.random.default_rng(seed)
    if levels is None:
        x, y = rng.standard_normal(n), rng.standard_normal(n)
    else:
        x, y = rng.integers(0, levels, n).astype(float), rng.integers(0, levels, n).astype(float)
    if np.all(x == x[0]) or np.all(y == y[0]):
        return
    num, den = brute_force_tau_b(x, y)
    assert kendall_tau_fast(x, y) == pytest.approx(float(num) / np.sqrt(den), abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 400))
def test_agrees_with_scipy(seed, n):
    rng = np.random.default_rng(seed)
    x = np.round(rng.standard_normal(n), 1)
    y = np.round(x + rng.standard_normal(n), 1)
    assert kendall_tau_fast(x, y) == pytest.approx(stats.kendalltau(x, y).statistic, abs=1e-12)


def test_matrix_examples():
    assert np.array_equal(kendall_matrix(np.arange(4.0)[:, None]), np.ones((1, 1)))
    rng = np.random.default_rng(1)
    tau = kendall_matrix(rng.standard_normal((10_000, 4)))
    assert np.array_equal(tau, tau.T)
    assert np.all(np.diag(tau) == 1.0)
    assert np.max(np.abs(tau - np.eye(4))) < 0.05


def test_matrix_arcsin_tau():
    x = sample_elliptical(EllipticalSpec(np.zeros(2), [[1.0, 0.5], [0.5, 1.0]]), 100_000, 2).values
    assert kendall_matrix(x)[0, 1] == pytest.approx(1.0 / 3.0, abs=0.01)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_monotone_invariance_exact(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((300, 3))
    y = np.column_stack([np.exp(x[:, 0]), x[:, 1] ** 3, np.arctan(x[:, 2])])
    assert np.array_equal(kendall_matrix(x), kendall_matrix(y))


def test_threads_do_not_change_results(monkeypatch):
    x = np.random.default_rng(3).standard_normal((2000, 6))
    monkeypatch.setenv("TRANSELL_THREADS", "1")
    serial = kendall_matrix(x)
    monkeypatch.setenv("TRANSELL_THREADS", "4")
    assert np.array_equal(serial, kendall_matrix(x))


def test_skeptic_examples():
    est = skeptic_correlation(np.eye(3))
    assert np.array_equal(est.corr.array, np.eye(3)) and not est.projected
    est = skeptic_correlation(np.array([[1.0, 1.0 / 3.0], [1.0 / 3.0, 1.0]]))
    assert est.corr.array[0, 1] == pytest.approx(0.5, abs=1e-15)


def test_skeptic_projects_indefinite_input():
    tau = np.array([[1.0, 0.9, -0.9], [0.9, 1.0, 0.9], [-0.9, 0.9, 1.0]])
    est = skeptic_correlation(tau)
    assert est.projected
    assert np.linalg.eigvalsh(est.corr.array)[0] > 0


def test_skeptic_recovers_transelliptical_scale():
    sigma = np.array([[1.0, 0.5, 0.2, 0.0], [0.5, 1.0, 0.4, 0.1], [0.2, 0.4, 1.0, 0.3], [0.0, 0.1, 0.3, 1.0]])
    base = EllipticalSpec(np.zeros(4), sigma, ChiSqOverK(5))
    spec = TransellipticalSpec(base, [np.exp, lambda v: v**3, np.cbrt, np.arctan])
    y = sample_transelliptical(spec, 50_000, 4).values
    est = skeptic_correlation(kendall_matrix(y))
    assert np.linalg.norm(est.corr.array - sigma) < 0.05 * 4


def test_skeptic_matches_pearson_for_gaussian():
    sigma = np.array([[1.0, 0.6, -0.3], [0.6, 1.0, 0.1], [-0.3, 0.1, 1.0]])
    x = sample_elliptical(EllipticalSpec(np.zeros(3), sigma), 100_000, 5).values
    est = skeptic_correlation(kendall_matrix(x)).corr.array
    assert np.max(np.abs(est - np.corrcoef(x, rowvar=False))) < 0.03


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 40))
def test_skeptic_entries_inside_unit_interval(seed, n):
    x = np.random.default_rng(seed).standard_normal((n, 4))
    est = skeptic_correlation(kendall_matrix(x)).corr.array
    off = est[~np.eye(4, dtype=bool)]
    assert np.all(np.abs(off) < 1.0)
