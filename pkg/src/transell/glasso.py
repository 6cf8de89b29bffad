"""Graphical lasso by block coordinate descent over the rows of the covariance.

Solves ``max log det K - tr(S K) - lam * sum_{i != j} |K_ij|``; the diagonal is
not penalized, so the fitted covariance keeps ``W_ii = S_ii`` exactly.
"""
from dataclasses import dataclass, field

import numpy as np

from ._kernels import lasso_cd
from .exceptions import InvalidLambda, NotConverged
from .matrix_core import SpdMatrix, cholesky, inverse, log_det, symmetrize

EDGE_TOL = 1e-8


@dataclass(frozen=True)
class SolverConfig:
    """Stopping rules shared by the glasso and PPG solvers.

    ``tol`` bounds the relative duality gap (glasso) or the KKT residual (PPG);
    ``change_tol`` bounds the largest entry change per sweep relative to the
    largest diagonal entry of ``S``.
    """

    tol: float = 1e-6
    change_tol: float = 1e-6
    max_iter: int = 10_000
    inner_tol: float = 1e-12
    inner_max_iter: int = 100_000
    kkt_tol: float = 1e-6


@dataclass(frozen=True, eq=False)
class GlassoFit:
    precision: SpdMatrix
    covariance: SpdMatrix
    lam: float
    iterations: int
    duality_gap: float
    loglik: float
    history: list = field(default_factory=list)

    def edge_count(self, tol=EDGE_TOL):
        k = self.precision.array
        iu = np.triu_indices_from(k, 1)
        return int(np.sum(np.abs(k[iu]) > tol))


def gaussian_loglik(k, s):
    """Per-observation Gaussian log-likelihood up to constants, ``log det K - tr(S K)``."""
    k = k if isinstance(k, SpdMatrix) else cholesky(k)
    return log_det(k) - float(np.sum(np.asarray(s) * k.array))


def offdiag_max(s):
    s = np.asarray(s, dtype=float)
    d = s.shape[0]
    if d < 2:
        return 0.0
    return float(np.max(np.abs(s[~np.eye(d, dtype=bool)])))


def lambda_path(s, n_points):
    """Log-spaced grid from ``max_{i!=j} |S_ij|`` down to one hundredth of it."""
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    lam_max = offdiag_max(s)
    return list(lam_max * np.logspace(0.0, -2.0, n_points))


def _kkt_residual(k_arr, s, lam):
    """Largest violation of the glasso stationarity conditions at ``K``."""
    w = np.linalg.inv(k_arr)
    d = s.shape[0]
    off = ~np.eye(d, dtype=bool)
    diff = w - s
    diag_res = np.max(np.abs(np.diag(diff)))
    nz = off & (np.abs(k_arr) > EDGE_TOL)
    z = off & ~nz
    # stationarity: W_ij - S_ij = lam * sign(K_ij) on the support
    res_nz = np.max(np.abs(diff[nz] - lam * np.sign(k_arr[nz]))) if nz.any() else 0.0
    res_z = np.max(np.maximum(np.abs(diff[z]) - lam, 0.0)) if z.any() else 0.0
    return float(max(diag_res, res_nz, res_z))


def _duality_gap(k_arr, w, s, lam):
    d = s.shape[0]
    off = ~np.eye(d, dtype=bool)
    primal = -np.linalg.slogdet(k_arr)[1] + np.sum(s * k_arr) + lam * np.sum(np.abs(k_arr[off]))
    dual = np.linalg.slogdet(w)[1] + d
    return float(primal - dual), float(max(1.0, abs(primal)))


def _precision_from_rows(w, beta):
    d = w.shape[0]
    k = np.zeros_like(w)
    for j in range(d):
        idx = np.arange(d) != j
        b = beta[idx, j]
        kjj = 1.0 / (w[j, j] - w[idx, j] @ b)
        k[j, j] = kjj
        k[idx, j] = -b * kjj
    return 0.5 * (k + k.T)


def glasso_fit(s, lam, cfg=None, warm_start=None):
    """Fit the l1-penalized precision matrix for penalty ``lam``.

    Parameters
    ----------
    s : array_like, shape (d, d)
        Symmetric PSD input with positive diagonal (covariance or correlation).
    lam : float
        Off-diagonal penalty, ``lam >= 0``.
    cfg : SolverConfig, optional
    warm_start : GlassoFit, optional
        Previous fit whose covariance seeds the sweeps (used along paths).

    Returns
    -------
    GlassoFit
        ``history`` holds ``log det W`` after every sweep, which is
        non-decreasing because each row update maximizes it exactly.

    Raises
    ------
    InvalidLambda
        For negative or non-finite ``lam``.
    NotConverged
        If ``cfg.max_iter`` sweeps do not meet both stopping rules.
    """
    cfg = cfg or SolverConfig()
    if not np.isfinite(lam) or lam < 0:
        raise InvalidLambda(f"lambda must be a finite non-negative number, got {lam}")
    s = symmetrize(s)
    d = s.shape[0]
    if np.any(np.diag(s) <= 0):
        raise ValueError("S must have a positive diagonal")
    scale = float(np.max(np.diag(s)))

    if d == 1:
        k = cholesky(1.0 / s)
        return GlassoFit(k, cholesky(s), float(lam), 0, 0.0, gaussian_loglik(k, s))

    # start inside the dual box |W_ij - S_ij| <= lam so every row subproblem stays PD
    off = offdiag_max(s)
    try:
        cholesky(s)
        s_pd = True
    except Exception:
        s_pd = False
    if warm_start is not None and s_pd:
        t = 1.0 if warm_start.lam <= lam else lam / warm_start.lam
        w = s + t * (np.array(warm_start.covariance.array, dtype=float) - s)
        np.fill_diagonal(w, np.diag(s))
        beta = -warm_start.precision.array / np.diag(warm_start.precision.array)[None, :]
        np.fill_diagonal(beta, 0.0)
    elif s_pd:
        w, beta = s.copy(), np.zeros((d, d))
    else:
        c = 1.0 if off <= lam else lam / off
        w = (1.0 - c) * s + c * np.diag(np.diag(s))
        beta = np.zeros((d, d))

    history = []
    gap = np.inf
    for sweep in range(1, cfg.max_iter + 1):
        change = 0.0
        for j in range(d):
            idx = np.flatnonzero(np.arange(d) != j)
            v = np.ascontiguousarray(w[np.ix_(idx, idx)])
            u = np.ascontiguousarray(s[idx, j])
            b = np.ascontiguousarray(beta[idx, j])
            w12, _ = lasso_cd(v, u, b, float(lam), cfg.inner_tol * scale, cfg.inner_max_iter)
            beta[idx, j] = b
            change = max(change, float(np.max(np.abs(w12 - w[idx, j]))))
            w[idx, j] = w12
            w[j, idx] = w12
        history.append(float(np.linalg.slogdet(w)[1]))
        if change < cfg.change_tol * scale:
            k_arr = _precision_from_rows(w, beta)
            g, ref = _duality_gap(k_arr, w, s, lam)
            gap = g / ref
            if gap < cfg.tol and _kkt_residual(k_arr, s, lam) < 1e-6 * max(scale, 1.0):
                break
    else:
        raise NotConverged(cfg.max_iter, gap)

    k_arr[np.abs(k_arr) <= EDGE_TOL * 1e-4] = 0.0
    precision = cholesky(k_arr)
    return GlassoFit(
        precision,
        inverse(precision),
        float(lam),
        sweep,
        max(gap, 0.0),
        gaussian_loglik(precision, s),
        history,
    )


def glasso_kkt_residual(fit, s):
    """Largest violation of the stationarity conditions, using ``inv(K)``."""
    return _kkt_residual(fit.precision.array, symmetrize(s), fit.lam)


def graph_mle(s, support, cfg=None):
    """Gaussian MLE of ``K`` with ``K_ij = 0`` off ``support`` (covariance selection).

    ``support`` is a boolean ``d x d`` mask of allowed off-diagonal entries.
    Row updates solve ``W_11 beta = s_12`` on the allowed coordinates only and
    repeat until no entry of ``W`` moves by more than ``cfg.change_tol``
    (relative to the largest diagonal entry of ``s``).
    """
    cfg = cfg or SolverConfig()
    s = symmetrize(s)
    d = s.shape[0]
    support = np.asarray(support, dtype=bool)
    support = support | support.T
    np.fill_diagonal(support, False)
    scale = float(np.max(np.diag(s)))
    try:
        cholesky(s)
        w = s.copy()
    except Exception:
        w = np.diag(np.diag(s))
    beta = np.zeros((d, d))
    for sweep in range(1, cfg.max_iter + 1):
        change = 0.0
        for j in range(d):
            idx = np.flatnonzero(np.arange(d) != j)
            act = idx[support[idx, j]]
            b = np.zeros(d - 1)
            if act.size:
                b_act = np.linalg.solve(w[np.ix_(act, act)], s[act, j])
                b[support[idx, j]] = b_act
            w12 = w[np.ix_(idx, idx)] @ b
            change = max(change, float(np.max(np.abs(w12 - w[idx, j]), initial=0.0)))
            beta[idx, j] = b
            w[idx, j] = w12
            w[j, idx] = w12
        if change < cfg.change_tol * scale:
            break
    else:
        raise NotConverged(cfg.max_iter, change)
    k = _precision_from_rows(w, beta)
    k[~support & ~np.eye(d, dtype=bool)] = 0.0
    return cholesky(k)
