"""Gaussian maximum likelihood under the M-matrix constraint ``K_ij <= 0``.

The solver works on the covariance ``Sigma``: each sweep visits every column
``j`` and replaces ``Sigma[-j, j]`` by the minimizer of ``y' Sigma[-j,-j]^{-1} y``
subject to ``y >= S[-j, j]``.  That step is solved through its dual, a
non-negative QP in ``beta`` with ``y = Sigma[-j,-j] beta`` and
``K[-j, j] = -beta * K_jj``, so non-positivity of the precision holds by
construction.  The sweeps start from a feasible positive-definite
``Sigma`` (``S`` itself when it is PD, otherwise an equicorrelated matrix
dominating ``S`` off the diagonal), so every iterate stays feasible and PD and
``log det Sigma`` increases monotonically.  ``S`` is never inverted, so
singular sample covariances (``n < d``) are allowed.
"""
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ._kernels import nonneg_qp_cd
from .exceptions import InfeasibleInput, NotConverged
from .glasso import SolverConfig, gaussian_loglik
from .matrix_core import SpdMatrix, cholesky, inverse, symmetrize

DIVERGENCE_LIMIT = 1e8
# diagonal match and Sigma_ij >= S_ij are held ten times tighter than the KKT tolerance
FEASIBILITY_FACTOR = 0.1


@dataclass(frozen=True, eq=False)
class PpgFit:
    precision: SpdMatrix
    covariance: SpdMatrix
    loglik: float
    kkt_residual: float
    iterations: int

    def edge_count(self, threshold=1e-8):
        k = self.precision.array
        iu = np.triu_indices_from(k, 1)
        return int(np.sum(-k[iu] > threshold))


@dataclass(frozen=True)
class PartialCorrelationGraph:
    """Edges ``(i, j, rho)`` with ``i < j`` and ``rho`` the partial correlation."""

    dim: int
    edges: tuple
    threshold: float

    def edge_set(self):
        return {(i, j) for i, j, _ in self.edges}


def kkt_residual(sigma, k, s):
    """Largest violation among the four optimality families of the M-matrix MLE.

    Diagonal match ``Sigma_ii = S_ii``; dual feasibility ``Sigma_ij >= S_ij``;
    primal feasibility ``K_ij <= 0``; complementary slackness
    ``(Sigma_ij - S_ij) K_ij = 0``.
    """
    d = s.shape[0]
    off = ~np.eye(d, dtype=bool)
    diff = sigma - s
    return float(
        max(
            np.max(np.abs(np.diag(diff))),
            np.max(np.maximum(-diff[off], 0.0), initial=0.0),
            np.max(np.maximum(k[off], 0.0), initial=0.0),
            np.max(np.abs(diff[off] * k[off]), initial=0.0),
        )
    )


def _feasibility(sigma, s):
    diff = sigma - s
    off = ~np.eye(s.shape[0], dtype=bool)
    return float(max(np.max(np.abs(np.diag(diff))), np.max(np.maximum(-diff[off], 0.0), initial=0.0)))


def _precision(sigma, beta):
    # inv(Sigma), raw and with the exact zeros of the active constraints restored
    raw = np.linalg.inv(sigma)
    raw = 0.5 * (raw + raw.T)
    k = raw.copy()
    active = (beta == 0.0) & (beta.T == 0.0)
    np.fill_diagonal(active, False)
    k[active] = 0.0
    return raw, k


def _feasible_start(s):
    diag = np.diag(s)
    try:
        cholesky(s)
        return s.copy()
    except Exception:
        pass
    sd = np.sqrt(diag)
    r = s / sd[:, None] / sd[None, :]
    d = s.shape[0]
    top = max(0.0, float(np.max(r[~np.eye(d, dtype=bool)])))
    if top >= 1.0:
        raise InfeasibleInput("S has a pair of perfectly correlated coordinates")
    rho = 0.5 * (1.0 + top)
    c = np.full((d, d), rho)
    np.fill_diagonal(c, 1.0)
    return c * sd[:, None] * sd[None, :]


def ppg_fit(s, cfg=None):
    """Maximize ``log det K - tr(S K)`` over M-matrices ``K``.

    Parameters
    ----------
    s : array_like, shape (d, d)
        Sample covariance or correlation; must have a positive diagonal but
        may be singular.
    cfg : SolverConfig, optional
        ``kkt_tol`` (default 1e-6) and ``max_iter`` (default 10 000 sweeps).

    Raises
    ------
    InfeasibleInput
        If a diagonal entry of ``s`` is not positive.
    NotConverged
        When the sweep budget runs out, or when a diagonal entry of ``K``
        exceeds 1e8 (the constrained MLE does not exist).
    """
    cfg = cfg or SolverConfig()
    s = symmetrize(s)
    d = s.shape[0]
    diag = np.diag(s).copy()
    if not np.all(diag > 0) or not np.all(np.isfinite(s)):
        raise InfeasibleInput("S must be finite with a strictly positive diagonal")
    scale = float(diag.max())
    beta = np.zeros((d, d))
    residual = np.inf

    if d == 1:
        k = cholesky(1.0 / s)
        return PpgFit(k, cholesky(s), gaussian_loglik(k, s), 0.0, 0)

    sigma = _feasible_start(s)

    for sweep in range(1, cfg.max_iter + 1):
        for j in range(d):
            idx = np.flatnonzero(np.arange(d) != j)
            a = np.ascontiguousarray(sigma[np.ix_(idx, idx)])
            b = np.ascontiguousarray(beta[idx, j])
            y, _ = nonneg_qp_cd(
                a, np.ascontiguousarray(s[idx, j]), b, cfg.inner_tol * scale, cfg.inner_max_iter
            )
            schur = diag[j] - float(y @ b)
            if not schur > 0 or 1.0 / schur > DIVERGENCE_LIMIT:
                raise NotConverged(sweep, np.inf, "M-matrix MLE diverges: K_jj exceeded 1e8")
            beta[idx, j] = b
            sigma[idx, j] = y
            sigma[j, idx] = y
        raw, k = _precision(sigma, beta)
        if np.max(np.diag(k)) > DIVERGENCE_LIMIT:
            raise NotConverged(sweep, np.inf, "M-matrix MLE diverges: K_jj exceeded 1e8")
        residual = max(kkt_residual(sigma, raw, s), kkt_residual(sigma, k, s))
        if residual < cfg.kkt_tol:
            # the reported pair is (K, inv(K)), so certify that pair too
            precision = cholesky(k)
            cov = inverse(precision)
            residual = max(residual, kkt_residual(cov.array, k, s))
            if residual < cfg.kkt_tol and _feasibility(cov.array, s) < FEASIBILITY_FACTOR * cfg.kkt_tol:
                break
    else:
        raise NotConverged(cfg.max_iter, residual)

    return PpgFit(precision, cov, gaussian_loglik(precision, s), residual, sweep)


def ppg_graph(fit, threshold=1e-8):
    """Edges where ``-K_ij > threshold``, weighted by the (non-negative) partial correlation."""
    k = fit.precision.array if hasattr(fit, "precision") else np.asarray(fit)
    d = k.shape[0]
    sd = np.sqrt(np.diag(k))
    edges = []
    for i, j in combinations(range(d), 2):
        if -k[i, j] > threshold:
            edges.append((i, j, float(-k[i, j] / (sd[i] * sd[j]))))
    return PartialCorrelationGraph(d, tuple(edges), float(threshold))


def random_m_matrix(d, rng, density=0.6, strength=0.9):
    """Random M-matrix with unit-free scaling, handy for tests and examples.

    Off-diagonal entries are ``-U(0, 1)`` on a random support; the diagonal is
    set so that every row is strictly diagonally dominant by a factor of
    ``1/strength``, then rescaled to unit diagonal.
    """
    w = rng.uniform(0.0, 1.0, size=(d, d)) * (rng.random((d, d)) < density)
    w = np.triu(w, 1)
    w = w + w.T
    k = -w
    row = w.sum(axis=1)
    np.fill_diagonal(k, np.where(row > 0, row / strength, 1.0))
    sd = 1.0 / np.sqrt(np.diag(k))
    return k * sd[:, None] * sd[None, :]
