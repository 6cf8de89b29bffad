"""Model selection and dependence diagnostics for partial correlation graphs.

Conditional quantities come in two flavours.  The data-analysis path
conditions through least-squares residuals on the remaining columns (what
:func:`tail_dependence_report` does).  The Monte-Carlo validation path keeps
only rows whose conditioning coordinates fall in a slab ``|x_C - x0| < h``
and then removes the residual within-slab linear trend
(:func:`slab_covariance`, :func:`slab_kendall`), because exact conditioning
has probability zero.
"""
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np
from scipy import stats

from .exceptions import DimensionTooLarge, InsufficientSample
from .glasso import EDGE_TOL, gaussian_loglik, glasso_fit, graph_mle
from .matrix_core import cholesky, inverse, m_matrix_certificate, symmetrize
from .rank_estimation import kendall_tau_fast

SLAB_HALF_WIDTH = 0.25


def _array(a):
    return np.asarray(a.array if hasattr(a, "array") else a, dtype=float)


def partial_correlations(k):
    """``-K_ij / sqrt(K_ii K_jj)`` with a unit diagonal."""
    k = _array(k)
    sd = np.sqrt(np.diag(k))
    rho = -k / sd[:, None] / sd[None, :]
    np.fill_diagonal(rho, 1.0)
    return rho


def conditional_mean_coeffs(k, i):
    """Regression coefficients of ``X_i`` on the other coordinates, ``-K_{i,(i)} / K_ii``.

    All entries are non-negative exactly when row ``i`` of ``K`` has
    non-positive off-diagonal entries, i.e. the conditional mean is
    increasing in every other coordinate.
    """
    k = _array(k)
    others = np.arange(k.shape[0]) != i
    return -k[i, others] / k[i, i]


def conditional_kendall(k, i, j):
    """Kendall's tau of ``(X_i, X_j)`` given all other coordinates.

    For an elliptical law this is ``2/pi * arcsin`` of the partial correlation,
    whatever the conditioning value.
    """
    if i == j:
        raise ValueError("i and j must differ")
    k = _array(k)
    rho = -k[i, j] / np.sqrt(k[i, i] * k[j, j])
    return float(2.0 / np.pi * np.arcsin(np.clip(rho, -1.0, 1.0)))


# --------------------------------------------------------------------------
# tail dependence


@dataclass(frozen=True, eq=False)
class TailDependenceReport:
    theta_marginal: np.ndarray
    theta_conditional: np.ndarray
    rho_sq_marginal: np.ndarray
    rho_sq_conditional: np.ndarray
    lambda_hat: float
    slope: float

    def offdiag_pairs(self, which="conditional"):
        """``(rho_sq, theta)`` vectors over ``i < j``."""
        theta = self.theta_conditional if which == "conditional" else self.theta_marginal
        rho = self.rho_sq_conditional if which == "conditional" else self.rho_sq_marginal
        iu = np.triu_indices_from(theta, 1)
        return rho[iu], theta[iu]


def _corr(a, b):
    a = a - a.mean()
    b = b - b.mean()
    den = np.sqrt(np.dot(a, a) * np.dot(b, b))
    return float(np.dot(a, b) / den) if den > 0 else 0.0


def tail_dependence_report(x, k_hat):
    """Squared-coordinate correlations against their Gaussian predictions.

    ``theta_marginal[i, j]`` is the sample correlation of ``x_i**2`` and
    ``x_j**2`` on standardized columns.  ``theta_conditional[i, j]`` is the
    sample correlation of squared least-squares residuals of ``x_i`` and
    ``x_j`` on the remaining columns.  In a scale mixture of normals both are
    ``lam + (1 - lam) rho**2``; ``lambda_hat`` and ``slope`` come from the
    least-squares line of the conditional values on ``rho_sq_conditional``.
    """
    x = np.asarray(x, dtype=float)
    n, d = x.shape
    if n <= d + 2:
        raise InsufficientSample(f"need n > d + 2 rows, got n={n}, d={d}")
    z = (x - x.mean(axis=0)) / x.std(axis=0)
    sq = z * z
    theta_m = np.eye(d)
    theta_c = np.eye(d)
    ones = np.ones((n, 1))
    for i, j in combinations(range(d), 2):
        theta_m[i, j] = theta_m[j, i] = _corr(sq[:, i], sq[:, j])
        rest = [c for c in range(d) if c not in (i, j)]
        design = np.hstack([ones, z[:, rest]])
        coef, *_ = np.linalg.lstsq(design, z[:, [i, j]], rcond=None)
        e = z[:, [i, j]] - design @ coef
        theta_c[i, j] = theta_c[j, i] = _corr(e[:, 0] ** 2, e[:, 1] ** 2)
    r = np.corrcoef(z, rowvar=False)
    rho_sq_m = r * r
    pc = partial_correlations(k_hat)
    rho_sq_c = pc * pc
    iu = np.triu_indices(d, 1)
    if iu[0].size >= 2 and np.ptp(rho_sq_c[iu]) > 0:
        slope, intercept = np.polyfit(rho_sq_c[iu], theta_c[iu], 1)
    else:
        # a single pair or no spread in rho^2: the slope is not identified,
        # use the model slope 1 - lam through the mean point
        t, p = theta_c[iu].mean(), rho_sq_c[iu].mean()
        intercept = (t - p) / (1.0 - p) if p < 1 else t
        slope = 1.0 - intercept
    return TailDependenceReport(theta_m, theta_c, rho_sq_m, rho_sq_c, float(intercept), float(slope))


# --------------------------------------------------------------------------
# EBIC and model selection


@dataclass(frozen=True)
class EbicScore:
    loglik: float
    edge_count: int
    gamma: float
    n: int
    d: int
    score: float


def ebic(fit_loglik_per_obs, edge_count, n, d, gamma=0.5):
    """Extended BIC, lower is better.

    ``score = -2 n loglik + E (log n + 4 gamma log d)`` where ``loglik`` is
    the average Gaussian log-likelihood per observation with constants
    dropped, ``(log det K - tr(S K)) / 2``.
    """
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    penalty = edge_count * (np.log(n) + 4.0 * gamma * np.log(d))
    score = -2.0 * n * fit_loglik_per_obs + penalty
    return EbicScore(float(fit_loglik_per_obs), int(edge_count), float(gamma), int(n), int(d), float(score))


def fit_path(s, path, cfg=None):
    """Glasso fits along ``path`` (sorted from large to small), warm-started."""
    fits = []
    prev = None
    for lam in sorted(path, reverse=True):
        prev = glasso_fit(s, lam, cfg, warm_start=prev)
        fits.append(prev)
    return fits


def support_loglik(s, fit, cfg=None):
    """``log det K - tr(S K)`` at the MLE restricted to the fit's edge set."""
    k = fit.precision.array
    return gaussian_loglik(graph_mle(s, np.abs(k) > EDGE_TOL, cfg), s)


def ebic_path(s, n, fits, gamma=0.5, cfg=None, refit=True):
    """EBIC score of every fit; refits are shared between fits with equal edge sets."""
    s = symmetrize(s)
    d = s.shape[0]
    cache = {}
    scores = []
    for fit in fits:
        if refit:
            key = (np.abs(fit.precision.array) > EDGE_TOL).tobytes()
            if key not in cache:
                cache[key] = support_loglik(s, fit, cfg)
            loglik = cache[key]
        else:
            loglik = fit.loglik
        scores.append(ebic(0.5 * loglik, fit.edge_count(), n, d, gamma))
    return scores


def select_model(s, n, path, gamma=0.5, cfg=None, fits=None, refit=True):
    """Fit every penalty in ``path`` and return the EBIC-optimal ``(fit, score)``.

    With ``refit`` (the default) each graph on the path is scored by the
    Gaussian likelihood maximized under its zero pattern, so the criterion
    compares graphs rather than shrinkage levels.  ``refit=False`` scores the
    penalized estimate itself.  Ties go to the larger penalty (sparser graph).
    """
    if len(path) == 0:
        raise ValueError("lambda path is empty")
    fits = fits if fits is not None else fit_path(s, path, cfg)
    best = None
    for fit, score in zip(fits, ebic_path(s, n, fits, gamma, cfg, refit)):
        if best is None or score.score < best[1].score:
            best = (fit, score)
    return best


# --------------------------------------------------------------------------
# faithfulness / Simpson audit


@dataclass(frozen=True)
class FaithfulnessAudit:
    is_inverse_m_matrix: bool
    sign_violations: list = field(default_factory=list)
    propagation_violations: list = field(default_factory=list)
    n_checked: int = 0

    @property
    def ok(self):
        return not self.sign_violations and not self.propagation_violations


def conditional_correlation(sigma, i, j, cond):
    """``corr(X_i, X_j | X_cond)`` from the scale matrix alone."""
    sigma = _array(sigma)
    idx = [i, j] + [c for c in cond]
    p = np.linalg.inv(sigma[np.ix_(idx, idx)])
    return float(-p[0, 1] / np.sqrt(p[0, 0] * p[1, 1]))


def faithfulness_audit(sigma, tol=1e-8):
    """Check every ``corr(X_i, X_j | X_C)`` for sign and zero-propagation failures.

    A sign violation is a conditional correlation below ``-tol`` (only
    reported when ``sigma`` is the inverse of an M-matrix).  A propagation
    violation is a conditioning set ``C`` with ``|corr| <= tol`` and a
    superset ``D`` with ``|corr| > tol``; zero marginal correlation turning
    into non-zero partial correlation (a Simpson-type reversal) is the
    ``C = {}`` case.  Enumeration is exhaustive, so ``d <= 12``.
    """
    sigma = _array(sigma)
    d = sigma.shape[0]
    if d > 12:
        raise DimensionTooLarge(f"exhaustive audit supports d <= 12, got {d}")
    cholesky(sigma)
    in_im = m_matrix_certificate(inverse(sigma)).is_m_matrix
    sign_viol, prop_viol = [], []
    checked = 0
    for i, j in combinations(range(d), 2):
        others = [c for c in range(d) if c not in (i, j)]
        m = len(others)
        masks = np.arange(1 << m)
        values = np.empty(masks.size)
        for mask in masks:
            cond = [others[b] for b in range(m) if mask >> b & 1]
            values[mask] = conditional_correlation(sigma, i, j, cond)
        checked += masks.size
        if in_im:
            for mask in np.flatnonzero(values < -tol):
                sign_viol.append((i, j, _members(others, mask), float(values[mask])))
        zero = np.abs(values) <= tol
        nonzero_masks = masks[~zero]
        for c in masks[zero]:
            sup = nonzero_masks[(nonzero_masks & c) == c]
            if sup.size:
                dm = int(sup[0])
                prop_viol.append(
                    (i, j, _members(others, c), _members(others, dm), float(values[dm]))
                )
    return FaithfulnessAudit(in_im, sign_viol, prop_viol, checked)


def _members(others, mask):
    return tuple(others[b] for b in range(len(others)) if int(mask) >> b & 1)


# --------------------------------------------------------------------------
# Mahalanobis goodness of fit


@dataclass(frozen=True, eq=False)
class MahalanobisReport:
    distances: np.ndarray
    exceed_95: float
    exceed_99: float
    dim: int


def mahalanobis_gof(x, s):
    """Row-wise ``x' S^{-1} x`` on centered columns and chi-square tail exceedances."""
    x = np.asarray(x, dtype=float)
    s = cholesky(s)
    xc = x - x.mean(axis=0)
    half = np.linalg.solve(s.chol, xc.T)
    dist = np.sum(half * half, axis=0)
    d = x.shape[1]
    q95, q99 = stats.chi2.ppf([0.95, 0.99], d)
    return MahalanobisReport(dist, float(np.mean(dist > q95)), float(np.mean(dist > q99)), d)


# --------------------------------------------------------------------------
# slab conditioning (Monte-Carlo validation)


def slab_mask(x, cond, x0, h=SLAB_HALF_WIDTH):
    x = np.asarray(x, dtype=float)
    cond = list(np.atleast_1d(cond))
    x0 = np.broadcast_to(np.asarray(x0, dtype=float), (len(cond),))
    return np.all(np.abs(x[:, cond] - x0) < h, axis=1)


def _detrend(v, design):
    coef, *_ = np.linalg.lstsq(design, v, rcond=None)
    return v - design @ coef


def slab_covariance(x, i, j, cond, x0=0.0, h=SLAB_HALF_WIDTH, g=None, n_batches=20):
    """Estimate ``cov(g(X_i), X_j | X_cond = x0)`` from rows in a slab.

    Both ``g(x_i)`` and ``x_j`` are detrended on an intercept plus the
    conditioning coordinates within the slab, which removes the first-order
    bias from the slab's width.  Returns ``(estimate, std_error, n_rows)``
    with a batch-means standard error.
    """
    x = np.asarray(x, dtype=float)
    cond = list(np.atleast_1d(cond))
    rows = x[slab_mask(x, cond, x0, h)]
    g = g or (lambda v: v)
    design = np.hstack([np.ones((rows.shape[0], 1)), rows[:, cond]])
    a = _detrend(g(rows[:, i]), design)
    b = _detrend(rows[:, j], design)
    prod = a * b
    batches = np.array([p.mean() for p in np.array_split(prod, n_batches)])
    return float(prod.mean()), float(batches.std(ddof=1) / np.sqrt(n_batches)), rows.shape[0]


def slab_kendall(x, i, j, cond, x0=0.0, h=SLAB_HALF_WIDTH, n_batches=20):
    """Conditional Kendall's tau of ``(X_i, X_j)`` given ``X_cond = x0`` from a slab.

    Coordinates are detrended linearly within the slab before ranking.
    Returns ``(estimate, std_error, n_rows)``; the error is from batch means.
    """
    x = np.asarray(x, dtype=float)
    cond = list(np.atleast_1d(cond))
    rows = x[slab_mask(x, cond, x0, h)]
    design = np.hstack([np.ones((rows.shape[0], 1)), rows[:, cond]])
    a = _detrend(rows[:, i], design)
    b = _detrend(rows[:, j], design)
    tau = kendall_tau_fast(a, b)
    parts = [kendall_tau_fast(pa, pb) for pa, pb in zip(np.array_split(a, n_batches), np.array_split(b, n_batches))]
    se = np.std(parts, ddof=1) / np.sqrt(n_batches)
    return float(tau), float(se), rows.shape[0]
