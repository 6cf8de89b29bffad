"""Kendall's tau and the SKEPTIC scatter estimate for transelliptical data.

The latent correlation of a transelliptical vector is recovered entrywise as
``sin(pi/2 * tau)`` without estimating the marginal transforms.
"""
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ._kernels import kendall_counts
from ._parallel import parallel_map
from .exceptions import DegenerateColumn
from .matrix_core import SpdMatrix, cholesky, nearest_correlation


@dataclass(frozen=True)
class ScatterEstimate:
    corr: SpdMatrix
    projected: bool


def tau_b_from_counts(n0, n1, n2, n3, discordant):
    """Tie-corrected tau from pair counts; shared by the fast path and its callers."""
    s = n0 - n1 - n2 + n3 - 2 * discordant
    return s / np.sqrt(float(n0 - n1) * float(n0 - n2))


def _dense_ranks(col):
    # ties keep equal integer codes, order is preserved
    return np.unique(col, return_inverse=True)[1].astype(np.int64)


def _tau_from_ranks(rx, ry):
    order = np.lexsort((ry, rx))
    n0, n1, n2, n3, disc = kendall_counts(rx[order], ry[order])
    if n1 == n0 or n2 == n0:
        return None
    return tau_b_from_counts(n0, n1, n2, n3, disc)


def kendall_tau_fast(x, y):
    """Kendall's tau-b in O(n log n).

    Sorts by ``(x, y)`` and counts the discordant pairs as the inversions of a
    merge sort over ``y`` (Knight's method), with tie runs counted on both
    margins and jointly.  Equals the pair-counting definition exactly.

    Raises
    ------
    DegenerateColumn
        If either vector is constant (``index`` 0 for ``x``, 1 for ``y``).
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError("x and y must have the same length")
    if x.size < 2:
        raise ValueError("Kendall's tau needs at least two observations")
    if np.isnan(x).any() or np.isnan(y).any():
        raise ValueError("NaN values are not allowed")
    for idx, v in enumerate((x, y)):
        if np.all(v == v[0]):
            raise DegenerateColumn(idx)
    return float(_tau_from_ranks(_dense_ranks(x), _dense_ranks(y)))


def kendall_matrix(x):
    """Matrix of pairwise tau-b values with unit diagonal.

    Pairs are computed in a thread pool sized by ``TRANSELL_THREADS``; the
    compiled kernel releases the GIL, and results do not depend on scheduling.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError("expected an n x d data matrix")
    n, d = x.shape
    if n < 2:
        raise ValueError("Kendall's tau needs at least two observations")
    if np.isnan(x).any():
        raise ValueError("NaN values are not allowed")
    for j in range(d):
        if np.all(x[:, j] == x[0, j]):
            raise DegenerateColumn(j)
    ranks = [_dense_ranks(x[:, j]) for j in range(d)]
    pairs = list(combinations(range(d), 2))
    values = parallel_map(lambda p: _tau_from_ranks(ranks[p[0]], ranks[p[1]]), pairs)
    tau = np.eye(d)
    for (i, j), v in zip(pairs, values):
        tau[i, j] = tau[j, i] = v
    return tau


def skeptic_correlation(k, eps=1e-8):
    """``sin(pi/2 * tau)`` entrywise, projected to the PD cone when needed."""
    tau = np.asarray(k, dtype=float)
    raw = np.sin(0.5 * np.pi * tau)
    np.fill_diagonal(raw, 1.0)
    raw = 0.5 * (raw + raw.T)
    try:
        if np.linalg.eigvalsh(raw)[0] >= 0.5 * eps:
            return ScatterEstimate(cholesky(raw), False)
    except np.linalg.LinAlgError:
        pass
    proj = nearest_correlation(raw, eps)
    return ScatterEstimate(proj, bool(np.max(np.abs(proj.array - raw)) > 1e-12))
