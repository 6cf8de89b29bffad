"""MTP2 feasibility of elliptical densities from their density generator.

Everything is phrased through ``phi(t) = log varphi_d(t)`` and the ratio
``r(t) = t phi''(t) / phi'(t)``.  Two verdicts are offered:

* fixed scale: with ``rho_*`` the smallest partial correlation of the scale
  matrix, the density is MTP2 iff ``-rho_*/(1+rho_*) <= r(t) <= rho_*/(1-rho_*)``
  for all ``t`` (closed window);
* dimension: some scale matrix in dimension ``d`` can work only if
  ``-1/d < r(t) < 1/(d-2)`` (open window).

Built-in generators carry exact ratio ranges.  Anything else is scanned on a
log grid, which is numerical evidence and not a proof.
"""
import re
from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np
from scipy import special

from .diagnostics import partial_correlations
from .exceptions import DensityUnderflow, GeneratorViolation
from .matrix_core import cholesky

GRID_LO, GRID_HI, GRID_N = 1e-6, 1e6, 10_000
PHI_PRIME_ZERO = 1e-14
PHI_PRIME_POS = 1e-12
MARGINAL_BAND = 1e-4
FD_STEP = 1e-3
FD_VIOLATION = -1e-6
LOG_UNDERFLOW = np.log(1e-300)
MAX_DIM_SCAN = 1024
SCAN_GRID_N = 1000
BOUNDARY_TOL = 1e-10


@dataclass(frozen=True)
class DensityGenerator:
    """``phi = log varphi_d`` with its first two derivatives.

    ``analytic_range`` is the exact ``(inf, sup)`` of ``t phi''/phi'`` over
    ``t > 0`` when known.  ``builder`` rebuilds the generator for another
    dimension when ``dim_dependent`` is set.
    """

    name: str
    log_phi: object
    phi_prime: object
    phi_second: object
    domain: tuple = (0.0, np.inf)
    dim_dependent: bool = False
    dim: int = 2
    params: dict = field(default_factory=dict)
    analytic_range: tuple = None
    builder: object = None

    def at_dim(self, d):
        if not self.dim_dependent or d == self.dim or self.builder is None:
            return self if d == self.dim else replace(self, dim=d)
        return self.builder(d)

    @property
    def exact(self):
        return self.analytic_range is not None


def gaussian(d=2):
    return DensityGenerator(
        "gaussian",
        lambda t: -0.5 * np.asarray(t, dtype=float),
        lambda t: np.full_like(np.asarray(t, dtype=float), -0.5),
        lambda t: np.zeros_like(np.asarray(t, dtype=float)),
        dim=d,
        analytic_range=(0.0, 0.0),
    )


def student_t(k, d=2):
    if not k > 0:
        raise ValueError("t generator needs k > 0")
    c = 0.5 * (k + d)
    return DensityGenerator(
        f"t(k={_fmt(k)})",
        lambda t: -c * np.log1p(np.asarray(t, dtype=float) / k),
        lambda t: -c / (k + np.asarray(t, dtype=float)),
        lambda t: c / (k + np.asarray(t, dtype=float)) ** 2,
        dim_dependent=True,
        dim=d,
        params={"k": k},
        # r(t) = -t / (k + t) sweeps (-1, 0)
        analytic_range=(-1.0, 0.0),
        builder=lambda dd: student_t(k, dd),
    )


def kotz(alpha, d=2):
    if not alpha > 0:
        raise ValueError("kotz generator needs alpha > 0")
    a = float(alpha)
    return DensityGenerator(
        f"kotz(alpha={_fmt(a)})",
        lambda t: -np.asarray(t, dtype=float) ** a,
        lambda t: -a * np.asarray(t, dtype=float) ** (a - 1.0),
        lambda t: -a * (a - 1.0) * np.asarray(t, dtype=float) ** (a - 2.0),
        dim=d,
        params={"alpha": a},
        analytic_range=(a - 1.0, a - 1.0),
    )


def logistic(d=2):
    def log_phi(t):
        t = np.asarray(t, dtype=float)
        return -t - 2.0 * np.log1p(np.exp(-t))

    def phi_second(t):
        e = np.exp(-np.asarray(t, dtype=float))
        return -2.0 * e / (1.0 + e) ** 2

    return DensityGenerator(
        "logistic",
        log_phi,
        lambda t: -np.tanh(0.5 * np.asarray(t, dtype=float)),
        phi_second,
        dim=d,
        # r(t) = t / sinh(t): 1 as t -> 0, 0 as t -> inf
        analytic_range=(0.0, 1.0),
    )


def _bessel_k_ratio(mu, z):
    """``K_{mu+1}(z) / K_mu(z)`` and ``log K_mu(z)`` for ``mu >= 0``.

    Upward recurrence ``q_mu = 1/q_{mu-1} + 2 mu / z`` from the fractional
    order, which stays finite where ``K_mu`` itself overflows.
    """
    base = mu - np.floor(mu)
    k0 = special.kve(base, z)
    q = special.kve(base + 1.0, z) / k0
    log_k = np.log(k0) - z
    m = base
    for _ in range(int(np.floor(mu))):
        log_k = log_k + np.log(q)
        m += 1.0
        q = 1.0 / q + 2.0 * m / z
    return q, log_k


def laplace(d=2):
    """Bessel-type generator ``(t/2)^(v/2) K_v(sqrt(2t))`` with ``v = (2-d)/2``."""
    v = (2.0 - d) / 2.0

    def bessel_ratio(t):
        # R = K_{v-1}(z) / K_v(z), using K_{-x} = K_x
        z = np.sqrt(2.0 * np.asarray(t, dtype=float))
        if v <= 0:
            q, _ = _bessel_k_ratio(-v, z)
            return z, q
        return z, special.kve(v - 1.0, z) / special.kve(v, z)

    def log_phi(t):
        t = np.asarray(t, dtype=float)
        z = np.sqrt(2.0 * t)
        _, log_k = _bessel_k_ratio(abs(v), z)
        return 0.5 * v * np.log(0.5 * t) + log_k

    def phi_prime(t):
        z, r = bessel_ratio(t)
        return -r / z

    def phi_second(t):
        z, r = bessel_ratio(t)
        dr = -1.0 + (2.0 * v - 1.0) / z * r + r * r
        return (r / z - dr) / (z * z)

    return DensityGenerator(
        "laplace",
        log_phi,
        phi_prime,
        phi_second,
        dim_dependent=True,
        dim=d,
        builder=laplace,
    )


def _fmt(x):
    return repr(int(x)) if float(x).is_integer() else repr(float(x))


_CALL = re.compile(r"^\s*([A-Za-z_]\w*)\s*(?:\((.*)\))?\s*$")


def parse_generator(text, d=2):
    """Build a generator from ``gaussian``, ``t(k)``, ``laplace``, ``kotz(alpha)`` or ``logistic``.

    Arguments may be positional or named: ``t(5)``, ``t(k=5)``, ``kotz(alpha=1.2)``.
    """
    m = _CALL.match(text)
    if not m:
        raise ValueError(f"cannot parse generator {text!r}")
    name = m.group(1).lower()
    args = [a.strip() for a in (m.group(2) or "").split(",") if a.strip()]
    values = {}
    pos = []
    for a in args:
        key, eq, val = a.partition("=")
        try:
            num = float(val if eq else key)
        except ValueError:
            raise ValueError(f"bad argument {a!r} in {text!r}") from None
        if eq:
            values[key.strip().lower()] = num
        else:
            pos.append(num)
    expected = {"gaussian": [], "logistic": [], "laplace": [], "t": ["k"], "kotz": ["alpha"]}
    if name not in expected:
        raise ValueError(f"unknown generator {name!r}; choose from {sorted(expected)}")
    names = expected[name]
    if len(pos) > len(names):
        raise ValueError(f"too many arguments for {name}")
    values.update(zip(names, pos))
    extra = set(values) - set(names) - {"d"}
    missing = set(names) - set(values)
    if extra or missing:
        raise ValueError(f"{name} takes parameters {names}, got {sorted(values)}")
    d = int(values.pop("d", d))
    if name == "t":
        return student_t(values["k"], d)
    if name == "kotz":
        return kotz(values["alpha"], d)
    return {"gaussian": gaussian, "logistic": logistic, "laplace": laplace}[name](d)


# --------------------------------------------------------------------------
# ratio range


def _probe_grid(g, grid_n):
    lo, hi = g.domain
    t = np.logspace(np.log10(GRID_LO), np.log10(GRID_HI), grid_n)
    return t[(t > lo) & (t < hi)]


def _ratio_on_grid(g, grid_n):
    t = _probe_grid(g, grid_n)
    d1 = np.asarray(g.phi_prime(t), dtype=float)
    d2 = np.asarray(g.phi_second(t), dtype=float)
    if not (np.all(np.isfinite(d1)) and np.all(np.isfinite(d2))):
        bad = t[~(np.isfinite(d1) & np.isfinite(d2))][0]
        raise GeneratorViolation(float(bad), f"generator derivatives not finite at t={bad:g}")
    pos = d1 > PHI_PRIME_POS
    if pos.any():
        raise GeneratorViolation(float(t[pos][0]), f"phi' > 0 at t={t[pos][0]:g}; not decreasing")
    flat = np.abs(d1) <= PHI_PRIME_ZERO
    if np.any(np.abs(d2[flat]) > PHI_PRIME_POS):
        bad = t[flat][np.abs(d2[flat]) > PHI_PRIME_POS][0]
        raise GeneratorViolation(float(bad), f"phi' = 0 but phi'' != 0 at t={bad:g}")
    use = d1 < -PHI_PRIME_ZERO
    return t[use], t[use] * d2[use] / d1[use]


def generator_ratio_range(g, grid_n=GRID_N):
    """``(inf, sup)`` of ``t phi''(t) / phi'(t)`` over ``{t : phi'(t) < 0}``.

    The generator's side conditions are always checked on a log grid over
    ``[1e-6, 1e6]``.  Built-ins return their exact range; other generators
    return the grid extremes.

    Raises
    ------
    GeneratorViolation
        If ``phi'`` is positive (beyond 1e-12) or not finite at a grid point.
    """
    if grid_n < 100:
        raise ValueError("grid_n must be at least 100")
    _, r = _ratio_on_grid(g, grid_n)
    if g.analytic_range is not None:
        return tuple(map(float, g.analytic_range))
    if r.size == 0:
        return 0.0, 0.0
    return float(r.min()), float(r.max())


# --------------------------------------------------------------------------
# verdicts


@dataclass(frozen=True)
class Mtp2Verdict:
    feasible: bool
    ratio_inf: float
    ratio_sup: float
    rho_star_bounds: tuple
    dim_bound: object
    mode: str
    dim: int
    window: tuple
    rho_star: float = None
    margin: float = np.inf
    exact: bool = True
    reason: str = ""

    @property
    def marginal(self):
        return abs(self.margin) < MARGINAL_BAND

    def as_dict(self):
        return {
            "feasible": self.feasible,
            "mode": self.mode,
            "dim": self.dim,
            "ratio_inf": self.ratio_inf,
            "ratio_sup": self.ratio_sup,
            "window": list(self.window),
            "rho_star": self.rho_star,
            "rho_star_bounds": None if self.rho_star_bounds is None else list(self.rho_star_bounds),
            "dim_bound": self.dim_bound,
            "marginal": self.marginal,
            "exact": self.exact,
            "reason": self.reason,
        }


def admissible_rho_star(lo, hi):
    """Interval ``[a, 1)`` of ``rho_*`` whose closed window holds ``[lo, hi]``, or None."""
    if not lo > -0.5:
        return None
    a = hi / (1.0 + hi) if hi > 0 else 0.0
    b = -lo / (1.0 + lo) if lo < 0 else 0.0
    return (max(a, b), 1.0)


def _dim_margin(lo, hi, d):
    upper = np.inf if d == 2 else 1.0 / (d - 2)
    return min(lo + 1.0 / d, upper - hi)


def _dim_ok(lo, hi, d):
    # open window: a boundary touch within BOUNDARY_TOL counts as outside
    return _dim_margin(lo, hi, d) > BOUNDARY_TOL


# built-in generators are pure functions of (name, params), so bounds can be reused
_BOUND_CACHE = {}


def dimension_bound(g, grid_n=GRID_N):
    """Largest ``d`` in ``2..1024`` whose open window holds the ratio range.

    ``"all d"`` when the range is exactly ``{0}``; ``"none"`` when even
    ``d = 2`` fails.  Exact ranges do not move with ``d`` and the windows are
    nested, so the scan stops at the first failure.  Dimension-dependent
    numerical generators are scanned to the end on a coarser grid.
    """
    key = (g.name, tuple(sorted(g.params.items())), grid_n) if g.builder or g.exact else None
    if key in _BOUND_CACHE:
        return _BOUND_CACHE[key]
    best = "none"
    scan_n = grid_n if g.exact else min(grid_n, SCAN_GRID_N)
    for d in range(2, MAX_DIM_SCAN + 1):
        lo, hi = generator_ratio_range(g.at_dim(d), scan_n)
        if lo == 0.0 and hi == 0.0:
            return "all d"
        if _dim_ok(lo, hi, d):
            best = d
        elif g.exact or not g.dim_dependent:
            break
    if key is not None:
        _BOUND_CACHE[key] = best
    return best


def mtp2_dimension_window(g, d, grid_n=GRID_N):
    """Necessary condition in dimension ``d``: the ratio range inside ``(-1/d, 1/(d-2))``."""
    if d < 2:
        raise ValueError("d must be at least 2")
    g = g.at_dim(d)
    lo, hi = generator_ratio_range(g, grid_n)
    upper = np.inf if d == 2 else 1.0 / (d - 2)
    feasible = _dim_ok(lo, hi, d)
    margin = _dim_margin(lo, hi, d)
    if feasible:
        reason = f"ratio range [{lo:.6g}, {hi:.6g}] inside the open window"
    else:
        reason = f"ratio range [{lo:.6g}, {hi:.6g}] leaves (-1/{d}, {'inf' if d == 2 else f'1/{d - 2}'})"
    return Mtp2Verdict(
        feasible,
        lo,
        hi,
        admissible_rho_star(lo, hi),
        dimension_bound(g, grid_n),
        "dimension",
        d,
        (-1.0 / d, float(upper)),
        margin=float(margin),
        exact=g.exact,
        reason=reason,
    )


def mtp2_check_fixed_scale(g, k, grid_n=GRID_N):
    """Decide MTP2 for the generator with precision matrix ``k``.

    ``rho_*`` is the smallest partial correlation of ``k``; a negative one is
    infeasible at once.  Otherwise feasible iff the ratio range sits inside
    ``[-rho_*/(1+rho_*), rho_*/(1-rho_*)]`` and its infimum exceeds -1/2.
    """
    k = cholesky(k).array
    d = k.shape[0]
    g = g.at_dim(d)
    lo, hi = generator_ratio_range(g, grid_n)
    pc = partial_correlations(k)
    iu = np.triu_indices(d, 1)
    rho = float(pc[iu].min()) if d > 1 else 0.0
    bounds = admissible_rho_star(lo, hi)
    dim_bound = dimension_bound(g, grid_n)
    if rho < 0:
        return Mtp2Verdict(
            False, lo, hi, bounds, dim_bound, "fixed_scale", d, (np.nan, np.nan), rho,
            margin=rho, exact=g.exact, reason="a partial correlation is negative",
        )
    w_lo, w_hi = -rho / (1.0 + rho), rho / (1.0 - rho)
    margin = min(lo - w_lo, w_hi - hi)
    # closed window: a boundary touch within BOUNDARY_TOL counts as inside
    feasible = margin >= -BOUNDARY_TOL and lo > -0.5
    if feasible:
        reason = f"ratio range [{lo:.6g}, {hi:.6g}] inside [{w_lo:.6g}, {w_hi:.6g}]"
    elif not lo > -0.5:
        reason = f"ratio infimum {lo:.6g} is not above -1/2: infeasible for every scale matrix"
    else:
        reason = f"ratio range [{lo:.6g}, {hi:.6g}] leaves [{w_lo:.6g}, {w_hi:.6g}]"
    return Mtp2Verdict(
        bool(feasible), lo, hi, bounds, dim_bound, "fixed_scale", d, (w_lo, w_hi), rho,
        margin=float(margin), exact=g.exact, reason=reason,
    )


# --------------------------------------------------------------------------
# finite-difference oracle


@dataclass(frozen=True)
class SupermodularityResult:
    supermodular: bool
    worst_value: float
    worst_point: np.ndarray
    worst_pair: tuple
    n_points: int
    n_skipped: int


def lattice(d, n_per_axis, half_width=3.0):
    """Regular grid on ``[-half_width, half_width]^d`` as an ``(m, d)`` array."""
    axis = np.linspace(-half_width, half_width, n_per_axis)
    mesh = np.meshgrid(*([axis] * d), indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def supermodularity_oracle(g, k, grid, h=FD_STEP):
    """Check ``d^2/dx_i dx_j log varphi(x'Kx) >= -1e-6`` at every grid point.

    Mixed partials use the four-point central stencil with step ``h``.  Points
    where any stencil value has ``varphi < 1e-300`` are skipped and counted.

    Raises
    ------
    DensityUnderflow
        If every grid point underflows.
    """
    k = cholesky(k).array
    grid = np.atleast_2d(np.asarray(grid, dtype=float))
    d = k.shape[0]
    if d > 4 or grid.shape[1] != d:
        raise ValueError("oracle needs d <= 4 and grid points of matching dimension")
    if grid.shape[0] > 100_000:
        raise ValueError("grid limited to 1e5 points")
    g = g.at_dim(d)

    def logf(x):
        with np.errstate(all="ignore"):
            return np.asarray(g.log_phi(np.einsum("ni,ij,nj->n", x, k, x)), dtype=float)

    skip = np.zeros(grid.shape[0], dtype=bool)
    worst = (np.inf, None, None)
    for i, j in combinations(range(d), 2):
        ei = np.zeros(d)
        ej = np.zeros(d)
        ei[i] = ej[j] = h
        vals = [logf(grid + si * ei + sj * ej) for si, sj in ((1, 1), (1, -1), (-1, 1), (-1, -1))]
        stack = np.stack(vals)
        bad = ~np.all(np.isfinite(stack) & (stack > LOG_UNDERFLOW), axis=0)
        skip |= bad
        mixed = (vals[0] - vals[1] - vals[2] + vals[3]) / (4.0 * h * h)
        mixed[bad] = np.inf
        idx = int(np.argmin(mixed))
        if mixed[idx] < worst[0]:
            worst = (float(mixed[idx]), grid[idx].copy(), (i, j))
    n_skip = int(skip.sum())
    if n_skip == grid.shape[0]:
        raise DensityUnderflow("density underflows at every grid point")
    value, point, pair = worst
    return SupermodularityResult(value >= FD_VIOLATION, value, point, pair, grid.shape[0], n_skip)
