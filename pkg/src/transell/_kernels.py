"""Compiled inner loops (numba).  Callers validate inputs; these do not."""
import numpy as np
from numba import njit

_JIT = dict(cache=True, nogil=True)


@njit(**_JIT)
def _tie_pairs(sorted_vals):
    # sum of t*(t-1)/2 over runs of equal values in a sorted array
    n = sorted_vals.shape[0]
    total = 0
    run = 1
    for i in range(1, n):
        if sorted_vals[i] == sorted_vals[i - 1]:
            run += 1
        else:
            total += run * (run - 1) // 2
            run = 1
    total += run * (run - 1) // 2
    return total


@njit(**_JIT)
def _joint_tie_pairs(xs, ys):
    n = xs.shape[0]
    total = 0
    run = 1
    for i in range(1, n):
        if xs[i] == xs[i - 1] and ys[i] == ys[i - 1]:
            run += 1
        else:
            total += run * (run - 1) // 2
            run = 1
    total += run * (run - 1) // 2
    return total


@njit(**_JIT)
def _merge_count(a):
    """Sort ``a`` in place (stable, bottom-up merge) and return the number of
    pairs ``i < j`` with ``a[i] > a[j]``."""
    n = a.shape[0]
    buf = np.empty_like(a)
    swaps = 0
    width = 1
    src = a
    dst = buf
    flipped = False
    while width < n:
        for lo in range(0, n, 2 * width):
            mid = min(lo + width, n)
            hi = min(lo + 2 * width, n)
            i = lo
            j = mid
            k = lo
            while i < mid and j < hi:
                if src[j] < src[i]:
                    dst[k] = src[j]
                    swaps += mid - i
                    j += 1
                else:
                    dst[k] = src[i]
                    i += 1
                k += 1
            while i < mid:
                dst[k] = src[i]
                i += 1
                k += 1
            while j < hi:
                dst[k] = src[j]
                j += 1
                k += 1
        src, dst = dst, src
        flipped = not flipped
        width *= 2
    if flipped:
        a[:] = src
    return swaps


@njit(**_JIT)
def kendall_counts(xs, ys):
    """Pair counts for tau-b from data already sorted lexicographically by (x, y).

    Returns ``(n0, n1, n2, n3, discordant)``: all pairs, pairs tied in x,
    pairs tied in y, pairs tied in both, and discordant pairs.
    """
    n = xs.shape[0]
    n0 = n * (n - 1) // 2
    n1 = _tie_pairs(xs)
    n3 = _joint_tie_pairs(xs, ys)
    work = ys.copy()
    disc = _merge_count(work)
    n2 = _tie_pairs(work)
    return n0, n1, n2, n3, disc


@njit(**_JIT)
def lasso_cd(v, u, beta, lam, tol, max_iter):
    """Cyclic coordinate descent for ``min 0.5 b'Vb - u'b + lam*|b|_1``.

    ``beta`` is the warm start and is updated in place; returns ``V @ beta``
    and the number of passes used.
    """
    m = u.shape[0]
    vb = v @ beta
    it = 0
    for it in range(1, max_iter + 1):
        delta_max = 0.0
        for k in range(m):
            old = beta[k]
            z = u[k] - (vb[k] - v[k, k] * old)
            if z > lam:
                new = (z - lam) / v[k, k]
            elif z < -lam:
                new = (z + lam) / v[k, k]
            else:
                new = 0.0
            if new != old:
                diff = new - old
                beta[k] = new
                for l in range(m):
                    vb[l] += v[l, k] * diff
                ad = abs(diff) * v[k, k]
                if ad > delta_max:
                    delta_max = ad
        if delta_max < tol:
            break
    return vb, it


@njit(**_JIT)
def nonneg_qp_cd(a, s, beta, tol, max_iter):
    """Coordinate descent for ``min b'Ab - 2 s'b`` subject to ``b >= 0``.

    Warm-started from ``beta`` (updated in place); returns ``A @ beta`` and
    the number of passes used.
    """
    m = s.shape[0]
    ab = a @ beta
    it = 0
    for it in range(1, max_iter + 1):
        delta_max = 0.0
        for k in range(m):
            old = beta[k]
            z = s[k] - (ab[k] - a[k, k] * old)
            new = z / a[k, k] if z > 0.0 else 0.0
            if new != old:
                diff = new - old
                beta[k] = new
                for l in range(m):
                    ab[l] += a[l, k] * diff
                ad = abs(diff) * a[k, k]
                if ad > delta_max:
                    delta_max = ad
        if delta_max < tol:
            break
    return ab, it
