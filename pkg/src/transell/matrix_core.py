"""Dense symmetric linear algebra shared by the estimators.

Matrices travel as plain ``numpy`` arrays; :class:`SpdMatrix` bundles an
array with its lower Cholesky factor so that inverses and log-determinants
do not refactorize.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, lapack

from .exceptions import IndexOutOfRange, NotPositiveDefinite

PIVOT_FLOOR = 1e-12
TOL_OFFDIAG = 1e-9
_MAX_CLIP_PASSES = 50


def symmetrize(a):
    """Return ``(a + a.T) / 2`` as a float array, checking squareness."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    return 0.5 * (a + a.T)


@dataclass(frozen=True, eq=False)
class SpdMatrix:
    """Symmetric positive-definite matrix with a cached Cholesky factor."""

    array: np.ndarray
    chol: np.ndarray

    def __post_init__(self):
        self.array.setflags(write=False)
        self.chol.setflags(write=False)

    @property
    def dim(self):
        return self.array.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.array if dtype is None else self.array.astype(dtype)


@dataclass(frozen=True)
class MMatrixCert:
    is_m_matrix: bool
    max_offdiag: float


def as_spd(a):
    return a if isinstance(a, SpdMatrix) else cholesky(a)


def cholesky(a):
    """Factor a symmetric matrix as ``L @ L.T``.

    A pivot counts as failed when it is not above ``1e-12`` times the
    largest diagonal entry, so the test is invariant to rescaling.

    Raises
    ------
    NotPositiveDefinite
        With ``pivot_index`` set to the first failing pivot.
    """
    if isinstance(a, SpdMatrix):
        return a
    a = symmetrize(a)
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    d = a.shape[0]
    if d == 0:
        raise ValueError("empty matrix")
    floor = PIVOT_FLOOR * max(np.max(np.diag(a)), 0.0)
    chol, info = lapack.dpotrf(a, lower=1, clean=1)
    if info > 0:
        raise NotPositiveDefinite(info - 1)
    if info < 0:
        raise ValueError(f"dpotrf argument {-info} invalid")
    pivots = np.diag(chol) ** 2
    bad = np.flatnonzero(pivots <= floor)
    if bad.size or floor == 0.0:
        raise NotPositiveDefinite(int(bad[0]) if bad.size else 0)
    return SpdMatrix(a, np.ascontiguousarray(chol))


def inverse(a):
    a = as_spd(a)
    inv = cho_solve((a.chol, True), np.eye(a.dim))
    return cholesky(inv)


def log_det(a):
    a = as_spd(a)
    return 2.0 * float(np.sum(np.log(np.diag(a.chol))))


def _index_set(idx, d, name):
    idx = np.atleast_1d(np.asarray(idx, dtype=int)).ravel()
    if idx.size and (idx.min() < 0 or idx.max() >= d):
        raise IndexOutOfRange(f"{name} indices {idx.tolist()} out of range for d={d}")
    if len(set(idx.tolist())) != idx.size:
        raise IndexOutOfRange(f"{name} indices contain duplicates")
    return idx


def schur_complement(a, keep, out):
    """Conditional scale ``A_II - A_IJ A_JJ^{-1} A_JI`` of block ``keep`` given ``out``.

    When ``out`` is the complement of ``keep`` this equals ``inv(inv(A)[I, I])``.
    """
    arr = np.asarray(a.array if isinstance(a, SpdMatrix) else symmetrize(a))
    d = arr.shape[0]
    keep = _index_set(keep, d, "keep")
    out = _index_set(out, d, "out")
    if np.intersect1d(keep, out).size:
        raise IndexOutOfRange("keep and out index sets overlap")
    a_ii = arr[np.ix_(keep, keep)]
    if out.size == 0:
        return cholesky(a_ii)
    jj = cholesky(arr[np.ix_(out, out)])
    a_ij = arr[np.ix_(keep, out)]
    return cholesky(a_ii - a_ij @ cho_solve((jj.chol, True), a_ij.T))


def nearest_correlation(a, eps=1e-8):
    """Project a unit-diagonal symmetric matrix onto the PD correlation matrices.

    Eigenvalues are clipped at ``eps`` and the result is rescaled back to unit
    diagonal.  Inputs whose smallest eigenvalue is at least ``eps / 2`` are
    returned unchanged, which makes the map idempotent.  The rescale can pull
    the smallest eigenvalue below ``eps / 2`` when the input is far from the
    cone; the clip is then repeated (rarely more than one extra pass).
    """
    out = symmetrize(a)
    np.fill_diagonal(out, 1.0)
    for _ in range(_MAX_CLIP_PASSES):
        w, v = np.linalg.eigh(out)
        if w[0] >= 0.5 * eps:
            break
        out = (v * np.maximum(w, eps)) @ v.T
        scale = 1.0 / np.sqrt(np.diag(out))
        out = symmetrize(out * scale[:, None] * scale[None, :])
        np.fill_diagonal(out, 1.0)
    return cholesky(out)


def m_matrix_certificate(k, tol_offdiag=TOL_OFFDIAG):
    arr = np.asarray(k.array if isinstance(k, SpdMatrix) else k, dtype=float)
    d = arr.shape[0]
    if d < 2:
        return MMatrixCert(True, 0.0)
    off = arr[~np.eye(d, dtype=bool)]
    max_off = float(off.max())
    return MMatrixCert(bool(max_off <= tol_offdiag), max_off)
