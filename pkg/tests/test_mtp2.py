import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from transell.exceptions import DensityUnderflow, GeneratorViolation
from transell.matrix_core import m_matrix_certificate
from transell.mtp2 import (
    DensityGenerator,
    dimension_bound,
    gaussian,
    generator_ratio_range,
    kotz,
    laplace,
    lattice,
    logistic,
    mtp2_check_fixed_scale,
    mtp2_dimension_window,
    parse_generator,
    student_t,
    supermodularity_oracle,
)

from conftest import random_spd


def equi(d, r):
    k = np.full((d, d), -r)
    np.fill_diagonal(k, 1.0)
    return k


def ratio_on(g, t):
    return t * g.phi_second(t) / g.phi_prime(t)


T = np.logspace(-5, 5, 400)


# generator closed forms


def test_t_ratio():
    g = student_t(5, 3)
    np.testing.assert_allclose(ratio_on(g, T), -T / (5 + T), rtol=1e-13)
    assert generator_ratio_range(g) == (-1.0, 0.0)


def test_kotz_ratio():
    g = kotz(1.5)
    np.testing.assert_allclose(ratio_on(g, T), 0.5, rtol=1e-13)
    assert generator_ratio_range(g) == (0.5, 0.5)


def test_logistic_ratio():
    g = logistic()
    t = T[T < 300]
    np.testing.assert_allclose(ratio_on(g, t), 2 * t / (np.exp(t) - np.exp(-t)), rtol=1e-10)
    assert generator_ratio_range(g) == (0.0, 1.0)


def test_laplace_three_dim_closed_form():
    g = laplace(3)
    z = np.sqrt(2 * T)
    np.testing.assert_allclose(ratio_on(g, T), -(1 + z / 2) / (1 + z), rtol=1e-12)


@pytest.mark.parametrize("d", [2, 3, 5, 20, 200])
def test_laplace_range_inside_minus_one_minus_half(d):
    lo, hi = generator_ratio_range(laplace(d))
    assert -1.0 < lo <= hi < -0.5


def test_laplace_log_phi_finite_in_high_dimension():
    g = laplace(400)
    assert np.all(np.isfinite(g.log_phi(T)))
    assert np.all(np.isfinite(g.phi_prime(T)))


def test_user_generator_violation():
    bad = DensityGenerator("bump", lambda t: t, lambda t: np.ones_like(t), lambda t: np.zeros_like(t))
    with pytest.raises(GeneratorViolation) as info:
        generator_ratio_range(bad)
    assert info.value.t > 0
    kink = DensityGenerator(
        "kink", lambda t: -t, lambda t: np.zeros_like(t), lambda t: np.ones_like(t)
    )
    with pytest.raises(GeneratorViolation):
        generator_ratio_range(kink)


def test_user_generator_grid_range():
    g = DensityGenerator(
        "power", lambda t: -(t**2), lambda t: -2 * t, lambda t: np.full_like(t, -2.0)
    )
    lo, hi = generator_ratio_range(g)
    assert (lo, hi) == pytest.approx((1.0, 1.0))
    assert not g.exact


def test_parse_generator():
    assert parse_generator("t(5)").params == {"k": 5.0}
    assert parse_generator("t(k=5)", d=4).dim == 4
    assert parse_generator("kotz(alpha=1.2)").params == {"alpha": 1.2}
    assert parse_generator("logistic").name == "logistic"
    assert parse_generator("laplace(d=3)").dim == 3
    for bad in ("cauchy", "t()", "kotz(beta=2)", "t(5,6)", "t(k=x)"):
        with pytest.raises(ValueError):
            parse_generator(bad)


# fixed-scale verdicts


@pytest.mark.parametrize("k", [1, 3, 5, 30])
@pytest.mark.parametrize("d", [2, 3, 6])
def test_t_never_feasible(k, d):
    v = mtp2_check_fixed_scale(student_t(k), equi(d, 0.9 / (d - 1)))
    assert not v.feasible
    assert v.rho_star_bounds is None


def test_gaussian_m_matrix_feasible(m_matrix):
    assert mtp2_check_fixed_scale(gaussian(), m_matrix(5, seed=1)).feasible


@pytest.mark.parametrize("rho,feasible", [(0.6, True), (0.4, False), (0.5, True)])
def test_bivariate_logistic(rho, feasible):
    v = mtp2_check_fixed_scale(logistic(), equi(2, rho))
    assert v.feasible is feasible
    assert v.rho_star_bounds == pytest.approx((0.5, 1.0))


def test_negative_partial_correlation_is_infeasible():
    v = mtp2_check_fixed_scale(gaussian(), np.array([[1.0, 0.2], [0.2, 1.0]]))
    assert not v.feasible and v.rho_star < 0


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 6), st.booleans())
def test_gaussian_specialization(seed, d, force_m):
    rng = np.random.default_rng(seed)
    if force_m:
        k = -np.abs(random_spd(rng, d))
        np.fill_diagonal(k, np.abs(k).sum(axis=1) + 0.1)
    else:
        k = random_spd(rng, d)
    v = mtp2_check_fixed_scale(gaussian(), k)
    assert v.feasible == m_matrix_certificate(k).is_m_matrix


# dimension windows


def test_kotz_examples():
    assert mtp2_dimension_window(kotz(1.2), 3).feasible
    assert not mtp2_dimension_window(kotz(1.2), 8).feasible
    assert dimension_bound(kotz(1.2)) == 6
    assert dimension_bound(kotz(1.0)) == "all d"


def test_logistic_dimensions():
    assert mtp2_dimension_window(logistic(), 2).feasible
    v = mtp2_dimension_window(logistic(), 3)
    assert not v.feasible and v.marginal


@pytest.mark.parametrize("d", [2, 3, 10, 100])
def test_laplace_never_feasible(d):
    assert not mtp2_dimension_window(laplace(), d).feasible
    assert not mtp2_check_fixed_scale(laplace(), equi(2, 0.9)).feasible


@pytest.mark.parametrize("g", [kotz(1.1), kotz(1.3), kotz(0.7), kotz(0.9), logistic(), student_t(4)])
def test_windows_nested(g):
    verdicts = [mtp2_dimension_window(g, d).feasible for d in range(2, 15)]
    first_bad = verdicts.index(False) if False in verdicts else len(verdicts)
    assert not any(verdicts[first_bad:])


@pytest.mark.parametrize("d", range(2, 51))
def test_equicorrelation_pd_bound(d):
    edge = 1.0 / (d - 1)
    assert np.all(np.linalg.eigvalsh(equi(d, edge * 0.999)) > 0)
    with pytest.raises(np.linalg.LinAlgError):
        np.linalg.cholesky(equi(d, edge * 1.001))


# finite-difference oracle


def test_oracle_gaussian_m_matrix(m_matrix):
    res = supermodularity_oracle(gaussian(), m_matrix(3, seed=2), lattice(3, 15))
    assert res.supermodular and res.n_skipped == 0


def test_oracle_t_violation():
    res = supermodularity_oracle(student_t(5), equi(2, 0.8), lattice(2, 61))
    assert not res.supermodular
    assert res.worst_value < -1e-6 and res.worst_point.shape == (2,)


def test_oracle_kotz_feasible():
    k = equi(2, 0.6)
    assert mtp2_check_fixed_scale(kotz(1.5), k).feasible
    assert supermodularity_oracle(kotz(1.5), k, lattice(2, 61)).supermodular


def test_oracle_underflow():
    with pytest.raises(DensityUnderflow):
        supermodularity_oracle(kotz(3.0), equi(2, 0.3), np.array([[50.0, 50.0]]))
    res = supermodularity_oracle(kotz(3.0), equi(2, 0.3), np.array([[50.0, 50.0], [0.5, 0.5]]))
    assert res.n_skipped == 1
