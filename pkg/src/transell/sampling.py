"""Elliptical and transelliptical samplers built on the scale mixture of normals.

Every draw is ``mu + tau**-0.5 * L @ z`` with ``z`` standard normal, ``L`` the
Cholesky factor of the scale matrix and ``tau`` an independent positive
mixing variable.  Random streams come from numpy's counter-based Philox
generator, so a ``seed`` fully determines the output.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.linalg import cho_solve
from scipy.special import exp1

from .exceptions import (
    IndexOutOfRange,
    InvalidMixing,
    MomentUndefined,
    NonMonotoneTransform,
)
from .matrix_core import SpdMatrix, cholesky, schur_complement


def make_rng(seed):
    """Philox-backed generator; the documented RNG for every sampler."""
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True, eq=False)
class DataMatrix:
    """An ``n x d`` observation matrix with column names."""

    values: np.ndarray
    columns: tuple = ()

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("DataMatrix needs a 2-d array")
        object.__setattr__(self, "values", values)
        if not self.columns:
            object.__setattr__(
                self, "columns", tuple(f"x{i + 1}" for i in range(values.shape[1]))
            )
        elif len(self.columns) != values.shape[1]:
            raise ValueError("column names do not match the number of columns")

    @property
    def shape(self):
        return self.values.shape

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


# --------------------------------------------------------------------------
# mixing laws


class MixingLaw:
    """Law of the positive scalar ``tau``."""

    def sample(self, rng, n):
        raise NotImplementedError


@dataclass(frozen=True)
class Constant(MixingLaw):
    value: float = 1.0

    def __post_init__(self):
        if not self.value > 0:
            raise InvalidMixing("constant mixing value must be positive")

    def sample(self, rng, n):
        return np.full(n, float(self.value))


@dataclass(frozen=True)
class ChiSqOverK(MixingLaw):
    """``tau ~ chi2_k / k``; gives the multivariate t with ``k`` degrees of freedom."""

    k: float

    def __post_init__(self):
        if not self.k > 0:
            raise InvalidMixing("degrees of freedom must be positive")

    def sample(self, rng, n):
        return rng.chisquare(self.k, size=n) / self.k


@dataclass(frozen=True)
class Exponential(MixingLaw):
    rate: float = 1.0

    def __post_init__(self):
        if not self.rate > 0:
            raise InvalidMixing("exponential rate must be positive")

    def sample(self, rng, n):
        return rng.exponential(1.0 / self.rate, size=n)


@dataclass(frozen=True, eq=False)
class Tabulated(MixingLaw):
    """Inverse-CDF sampling from a quantile table, linearly interpolated.

    ``probs`` must be increasing in ``[0, 1]`` and ``quantiles`` positive and
    non-decreasing.
    """

    probs: np.ndarray
    quantiles: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.probs, dtype=float)
        q = np.asarray(self.quantiles, dtype=float)
        if p.shape != q.shape or p.ndim != 1 or p.size < 2:
            raise InvalidMixing("quantile table needs matching 1-d arrays of length >= 2")
        if np.any(np.diff(p) <= 0) or p[0] < 0 or p[-1] > 1:
            raise InvalidMixing("probability grid must be increasing within [0, 1]")
        if not np.all(np.isfinite(q)) or np.any(q <= 0):
            raise InvalidMixing("tabulated quantile function returned a non-positive value")
        if np.any(np.diff(q) < 0):
            raise InvalidMixing("tabulated quantiles must be non-decreasing")
        object.__setattr__(self, "probs", p)
        object.__setattr__(self, "quantiles", q)

    @classmethod
    def from_quantile(cls, quantile, grid=None):
        if grid is None:
            grid = np.linspace(0.0005, 0.9995, 1999)
        grid = np.asarray(grid, dtype=float)
        return cls(grid, np.asarray([quantile(u) for u in grid], dtype=float))

    def sample(self, rng, n):
        u = rng.random(n)
        return np.interp(u, self.probs, self.quantiles)


# --------------------------------------------------------------------------
# specs


@dataclass(frozen=True, eq=False)
class EllipticalSpec:
    mu: np.ndarray
    sigma: SpdMatrix
    mixing: MixingLaw = field(default_factory=Constant)

    def __post_init__(self):
        sigma = cholesky(self.sigma)
        mu = np.asarray(self.mu, dtype=float).ravel()
        if mu.size == 1 and sigma.dim > 1 and mu[0] == 0.0:
            mu = np.zeros(sigma.dim)
        if mu.size != sigma.dim:
            raise ValueError(f"mu has length {mu.size}, sigma has dimension {sigma.dim}")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sigma)

    @property
    def dim(self):
        return self.sigma.dim


@dataclass(frozen=True, eq=False)
class TransellipticalSpec:
    """Coordinatewise increasing maps ``transforms[i]`` applied to a latent elliptical draw.

    ``transforms`` must be vectorized callables; ``inverses`` are optional and
    only used by callers that need to map data back to the latent scale.
    """

    base: EllipticalSpec
    transforms: Sequence[Callable]
    inverses: Optional[Sequence[Callable]] = None

    def __post_init__(self):
        if len(self.transforms) != self.base.dim:
            raise ValueError("need one transform per coordinate")
        if self.inverses is not None and len(self.inverses) != self.base.dim:
            raise ValueError("need one inverse per coordinate")


@dataclass(frozen=True)
class LambdaValue:
    """Tail-dependence constant of a mixing law.

    ``exact`` is false for Monte-Carlo values, which then carry a batch-means
    ``std_error``.  ``truncation`` is set when the estimate refers to the law of
    ``tau`` conditioned on ``tau >= truncation``.
    """

    value: float
    exact: bool = True
    std_error: float = 0.0
    truncation: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.value}")

    def __float__(self):
        return float(self.value)


# --------------------------------------------------------------------------
# samplers


def sample_elliptical(spec, n, seed):
    """Draw ``n`` i.i.d. rows from ``spec``; bit-identical for equal seeds."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return DataMatrix(_sample_with_tau(spec, n, seed)[0])


def _sample_with_tau(spec, n, seed):
    rng = make_rng(seed)
    z = rng.standard_normal((n, spec.dim))
    tau = np.asarray(spec.mixing.sample(rng, n), dtype=float)
    if not np.all(tau > 0) or not np.all(np.isfinite(tau)):
        raise InvalidMixing("mixing law produced a non-positive or non-finite draw")
    return spec.mu + (z @ spec.sigma.chol.T) / np.sqrt(tau)[:, None], tau


def check_monotone(transform, grid, coordinate=0):
    values = np.asarray(transform(np.asarray(grid, dtype=float)), dtype=float)
    if values.shape != np.shape(grid) or np.any(np.diff(values) < 0) or np.any(np.isnan(values)):
        raise NonMonotoneTransform(coordinate)


def sample_transelliptical(spec, n, seed):
    latent = sample_elliptical(spec.base, n, seed).values
    out = np.empty_like(latent)
    for i, g in enumerate(spec.transforms):
        col = latent[:, i]
        check_monotone(g, np.linspace(col.min(), col.max(), 257), coordinate=i)
        out[:, i] = g(col)
    return DataMatrix(out)


def _batch_lambda(inv_tau, n_batches=20):
    def lam(v):
        m1 = v.mean()
        m2 = np.mean(v * v)
        var = m2 - m1 * m1
        return var / (var + 2.0 * m2)

    batches = np.array_split(inv_tau, n_batches)
    vals = np.array([lam(b) for b in batches])
    return lam(inv_tau), vals.std(ddof=1) / np.sqrt(n_batches)


def truncated_exponential_lambda(rate, truncation):
    """Closed-form lambda for ``tau ~ Exp(rate)`` conditioned on ``tau >= truncation``.

    With ``c = rate * truncation`` the conditional moments of ``1/tau`` are
    ``E[1/tau] = rate * e^c E1(c)`` and ``E[1/tau^2] = rate^2 (1/c - e^c E1(c))``.
    Without truncation ``E[1/tau]`` diverges; lambda tends to 1/3 as ``c -> 0``.
    """
    c = rate * truncation
    g = np.exp(c) * exp1(c)
    m1 = rate * g
    m2 = rate * rate * (1.0 / c - g)
    var = m2 - m1 * m1
    return var / (var + 2.0 * m2)


def lambda_of_mixing(mixing, mc_n=200_000, seed=0, truncation=None):
    """Return ``var(1/tau) / (var(1/tau) + 2 E(1/tau^2))``.

    Closed forms: ``Constant`` gives 0 and ``ChiSqOverK(k)`` gives ``1/(k-1)``
    (moments need ``k > 4``).  ``Exponential`` has no finite ``E(1/tau)``, so it
    is estimated for the law truncated at ``truncation`` (default ``0.01/rate``).
    Everything else is a Monte-Carlo estimate from ``mc_n`` draws.
    """
    if isinstance(mixing, Constant):
        return LambdaValue(0.0)
    if isinstance(mixing, ChiSqOverK):
        if mixing.k <= 4:
            raise MomentUndefined(f"E(1/tau^2) is infinite for chi2_k/k with k={mixing.k} <= 4")
        return LambdaValue(1.0 / (mixing.k - 1.0))
    rng = make_rng(seed)
    if isinstance(mixing, Exponential):
        if truncation is None:
            truncation = 0.01 / mixing.rate
        # conditioned on tau >= truncation: memoryless shift
        tau = truncation + rng.exponential(1.0 / mixing.rate, size=mc_n)
    else:
        tau = np.asarray(mixing.sample(rng, mc_n), dtype=float)
        if np.any(tau <= 0):
            raise InvalidMixing("mixing law produced a non-positive draw")
    inv = 1.0 / tau
    if not np.all(np.isfinite(inv * inv)):
        raise MomentUndefined("1/tau^2 overflowed; moments are not finite")
    value, se = _batch_lambda(inv)
    return LambdaValue(float(np.clip(value, 0.0, 1.0)), False, float(se), truncation)


# --------------------------------------------------------------------------
# conditionals


def conditional_sampler(spec, cond_idx, cond_vals, seed=0, n_draws=400_000, bandwidth=0.1):
    """Law of ``X_I | X_J = x_J`` where ``I`` is the complement of ``cond_idx``.

    Mean and scale follow the Gaussian formulas.  For ``Constant`` the mixing
    law is unchanged; for ``ChiSqOverK(k)`` and ``Exponential`` the posterior of
    ``tau`` is a gamma law, so the conditional is again a t law (``k + |J|``,
    resp. ``|J| + 2``, degrees of freedom) with an inflated scale.  Other laws
    get a tabulated posterior for ``tau`` from joint draws whose ``X_J`` lies
    within ``bandwidth * sqrt(Sigma_jj)`` of ``x_J`` in every coordinate.
    """
    d = spec.dim
    cond_idx = np.atleast_1d(np.asarray(cond_idx, dtype=int))
    cond_vals = np.atleast_1d(np.asarray(cond_vals, dtype=float))
    if cond_idx.size == 0 or cond_idx.size >= d:
        raise IndexOutOfRange("conditioning set must be a non-empty proper subset")
    if cond_idx.min() < 0 or cond_idx.max() >= d or len(set(cond_idx.tolist())) != cond_idx.size:
        raise IndexOutOfRange(f"conditioning indices {cond_idx.tolist()} invalid for d={d}")
    if cond_vals.size != cond_idx.size:
        raise ValueError("cond_vals must match cond_idx in length")
    keep = np.setdiff1d(np.arange(d), cond_idx)

    sig = spec.sigma.array
    s_jj = cholesky(sig[np.ix_(cond_idx, cond_idx)])
    dev = cond_vals - spec.mu[cond_idx]
    sol = cho_solve((s_jj.chol, True), dev)
    mu_c = spec.mu[keep] + sig[np.ix_(keep, cond_idx)] @ sol
    scale = schur_complement(spec.sigma, keep, cond_idx).array
    q = cond_idx.size
    delta = float(dev @ sol)

    mixing = spec.mixing
    if isinstance(mixing, Constant):
        return EllipticalSpec(mu_c, scale, mixing)
    if isinstance(mixing, ChiSqOverK):
        k = mixing.k
        return EllipticalSpec(mu_c, scale * (k + delta) / (k + q), ChiSqOverK(k + q))
    if isinstance(mixing, Exponential):
        r = mixing.rate
        return EllipticalSpec(mu_c, scale * (2.0 * r + delta) / (q + 2.0), ChiSqOverK(q + 2.0))

    x, tau = _sample_with_tau(spec, n_draws, seed)
    h = bandwidth * np.sqrt(np.diag(sig)[cond_idx])
    accept = np.all(np.abs(x[:, cond_idx] - cond_vals) <= h, axis=1)
    if accept.sum() < 50:
        raise InvalidMixing(
            f"only {int(accept.sum())} of {n_draws} draws fell in the conditioning window"
        )
    post = np.sort(tau[accept])
    probs = (np.arange(post.size) + 0.5) / post.size
    return EllipticalSpec(mu_c, scale, Tabulated(probs, post))
