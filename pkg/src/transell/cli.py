"""``transell`` command line tool.

Exit codes: 0 success, 2 bad input (CSV, family or generator spec), 3 solver
did not converge.
"""
import argparse
import csv
import logging
import re
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import artifacts
from .diagnostics import (
    ebic,
    ebic_path,
    faithfulness_audit,
    fit_path,
    mahalanobis_gof,
    tail_dependence_report,
)
from .exceptions import InsufficientSample, NotConverged, TransellError
from .glasso import lambda_path
from .matrix_core import cholesky, m_matrix_certificate
from .mtp2 import mtp2_check_fixed_scale, mtp2_dimension_window, parse_generator
from .positive_mle import ppg_fit
from .rank_estimation import kendall_matrix, skeptic_correlation
from .sampling import (
    ChiSqOverK,
    Constant,
    DataMatrix,
    EllipticalSpec,
    Exponential,
    TransellipticalSpec,
    sample_elliptical,
    sample_transelliptical,
)

log = logging.getLogger("transell")

EXIT_OK, EXIT_INPUT, EXIT_SOLVER = 0, 2, 3


class InputError(Exception):
    pass


# --------------------------------------------------------------------------
# CSV input


def _is_number(text):
    try:
        float(text)
    except ValueError:
        return False
    return True


def read_csv(path):
    """Parse a numeric CSV with an optional header row.

    The first row is a header when any of its cells is not a number.  Empty,
    non-numeric, NaN and infinite cells are errors naming the row and column
    (both 1-based, counting the header line).
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh)]
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from None
    rows = [r for r in rows if any(c.strip() for c in r)]
    if not rows:
        raise InputError(f"{path}: no data")
    header = None
    start = 0
    if not all(_is_number(c) for c in rows[0]):
        header = tuple(c.strip() for c in rows[0])
        start = 1
    width = len(rows[0])
    values = []
    for r_idx, row in enumerate(rows[start:], start=start + 1):
        if len(row) != width:
            raise InputError(f"{path}: row {r_idx} has {len(row)} cells, expected {width}")
        parsed = []
        for c_idx, cell in enumerate(row, start=1):
            text = cell.strip()
            try:
                v = float(text)
            except ValueError:
                raise InputError(f"{path}: row {r_idx}, column {c_idx}: not a number ({text!r})") from None
            if not np.isfinite(v):
                raise InputError(f"{path}: row {r_idx}, column {c_idx}: missing or non-finite value ({text!r})")
            parsed.append(v)
        values.append(parsed)
    if not values:
        raise InputError(f"{path}: header only, no data rows")
    return DataMatrix(np.array(values), header or ())


def write_csv(path, data):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(data.columns) + "\n")
        for row in data.values:
            fh.write(",".join(artifacts.fmt_float(v) for v in row) + "\n")


# --------------------------------------------------------------------------
# fit


@dataclass(frozen=True)
class PipelineConfig:
    input: Path
    out: Path
    method: str = "skeptic"
    estimator: str = "glasso"
    lambda_points: int = 30
    gamma: float = 0.5
    threshold: float = 1e-8
    seed: int = 0
    tail_report: bool = False
    mahalanobis: bool = False
    audit: bool = False

    def validate(self):
        if self.method not in ("pearson", "skeptic"):
            raise InputError(f"unknown method {self.method!r}")
        if self.estimator not in ("glasso", "ppg", "both"):
            raise InputError(f"unknown estimator {self.estimator!r}")
        if self.lambda_points < 2:
            raise InputError("--lambda-points must be at least 2")
        if not 0.0 <= self.gamma <= 1.0:
            raise InputError("--gamma must lie in [0, 1]")
        if not self.threshold >= 0:
            raise InputError("--threshold must be non-negative")


def scatter_matrix(x, method):
    """Correlation input for the estimators: Pearson on standardized columns or SKEPTIC."""
    x = np.asarray(x, dtype=float)
    sd = x.std(axis=0)
    if np.any(sd == 0):
        raise InputError(f"column {int(np.argmax(sd == 0)) + 1} is constant")
    if method == "pearson":
        z = (x - x.mean(axis=0)) / sd
        s = z.T @ z / x.shape[0]
        return 0.5 * (s + s.T), False
    est = skeptic_correlation(kendall_matrix(x))
    return est.corr.array, est.projected


def _fit_glasso(s, n, cfg):
    path = lambda_path(s, cfg.lambda_points)
    fits = fit_path(s, path)
    scores = ebic_path(s, n, fits, cfg.gamma)
    # first minimum in large-to-small order, so ties keep the sparser fit
    best = int(np.argmin([sc.score for sc in scores]))
    fit, score = fits[best], scores[best]
    log.info("glasso: lambda %.6g selected, %d edges", fit.lam, fit.edge_count())
    edges = artifacts.graph_edges(fit.precision.array, cfg.threshold)
    table = [(f.lam, f.edge_count(), 0.5 * n * f.loglik, n * sc.loglik, sc.score) for f, sc in zip(fits, scores)]
    return {
        "estimator": "glasso",
        "lambda": fit.lam,
        "precision": fit.precision.array,
        "edges": edges,
        "loglik": 0.5 * n * fit.loglik,
        "refit_loglik": n * score.loglik,
        "ebic": score.score,
        "m_matrix": m_matrix_certificate(fit.precision).is_m_matrix,
        "path": table,
    }


def _fit_ppg(s, n, cfg):
    fit = ppg_fit(s)
    log.info("ppg: %d sweeps, KKT residual %.3g", fit.iterations, fit.kkt_residual)
    edges = artifacts.graph_edges(fit.precision.array, cfg.threshold, positive_only=True)
    return {
        "estimator": "ppg",
        "lambda": None,
        "precision": fit.precision.array,
        "edges": edges,
        "loglik": 0.5 * n * fit.loglik,
        "ebic": ebic(0.5 * fit.loglik, len(edges), n, s.shape[0], cfg.gamma).score,
        "m_matrix": m_matrix_certificate(fit.precision).is_m_matrix,
        "kkt": fit.kkt_residual,
    }


def _report(cfg, data, s, projected, results):
    n, d = data.shape
    out = [
        "transell fit report",
        "===================",
        f"input: {cfg.input}",
        f"n = {n}, d = {d}, method = {cfg.method}, gamma = {cfg.gamma}, threshold = {cfg.threshold:g}",
        "loglik is n/2 (log det K - tr(S K)); EBIC = -2 loglik + E (log n + 4 gamma log d),",
    ]
    out.append("with the glasso loglik taken at the MLE refitted on each graph's edge set")
    if projected:
        out.append("note: the rank correlation matrix was not positive definite and was projected")
    for r in results:
        out.append("")
        lam = "-" if r["lambda"] is None else f"{r['lambda']:.6g}"
        out.append(f"[{r['estimator']}] lambda = {lam}, edges = {len(r['edges'])}, "
                   f"loglik = {r['loglik']:.6f}, EBIC = {r['ebic']:.6f}, M-matrix = {r['m_matrix']}")
        if "kkt" in r:
            out.append(f"  KKT residual {r['kkt']:.3g}")
        if "path" in r:
            out.append(f"  loglik refitted on the selected graph = {r['refit_loglik']:.6f}")
            out.append("  lambda path (lambda, edges, penalized-fit loglik, refitted loglik, EBIC):")
            for lam_, e, ll, rl, sc in r["path"]:
                mark = " <" if lam_ == r["lambda"] else ""
                out.append(f"    {lam_:12.6g} {e:6d} {ll:16.6f} {rl:16.6f} {sc:16.6f}{mark}")
    if len(results) == 2:
        g, p = results
        out += ["", "comparison", "----------",
                f"{'estimator':<10} {'edges':>6} {'loglik':>18} {'EBIC':>18}"]
        for r in results:
            out.append(f"{r['estimator']:<10} {len(r['edges']):>6} {r['loglik']:>18.6f} {r['ebic']:>18.6f}")
        common = {(i, j) for i, j, _ in g["edges"]} & {(i, j) for i, j, _ in p["edges"]}
        out.append(f"shared edges: {len(common)}")
    if cfg.tail_report:
        out.append("")
        try:
            rep = tail_dependence_report(data.values, results[0]["precision"])
            out.append(f"tail dependence: lambda_hat = {rep.lambda_hat:.4f}, slope = {rep.slope:.4f}")
        except InsufficientSample as exc:
            out.append(f"tail dependence: skipped ({exc})")
    if cfg.mahalanobis:
        rep = mahalanobis_gof(data.values, np.cov(data.values, rowvar=False, bias=True))
        out.append("")
        out.append(f"Mahalanobis: exceed chi2_{d} 0.95 quantile {rep.exceed_95:.4f} (expect 0.05), "
                   f"0.99 quantile {rep.exceed_99:.4f} (expect 0.01)")
    if cfg.audit:
        out.append("")
        for r in results:
            if d > 12:
                out.append(f"faithfulness audit ({r['estimator']}): skipped, d > 12")
                continue
            a = faithfulness_audit(np.linalg.inv(r["precision"]))
            out.append(f"faithfulness audit ({r['estimator']}): {len(a.sign_violations)} sign and "
                       f"{len(a.propagation_violations)} propagation violations over {a.n_checked} checks")
    return "\n".join(out) + "\n"


def cmd_fit(cfg):
    cfg.validate()
    data = read_csv(cfg.input)
    n, d = data.shape
    if n < 3 or d < 2:
        raise InputError(f"need at least 3 rows and 2 columns, got {n} x {d}")
    log.info("read %d rows x %d columns from %s", n, d, cfg.input)
    s, projected = scatter_matrix(data.values, cfg.method)
    results = []
    if cfg.estimator in ("glasso", "both"):
        results.append(_fit_glasso(s, n, cfg))
    if cfg.estimator in ("ppg", "both"):
        results.append(_fit_ppg(s, n, cfg))
    cfg.out.mkdir(parents=True, exist_ok=True)
    for r in results:
        doc = artifacts.graph_document(
            dim=d, n=n, method=cfg.method, estimator=r["estimator"], lam=r["lambda"],
            threshold=cfg.threshold, columns=data.columns, edges=r["edges"],
            loglik=r["loglik"], ebic=r["ebic"], m_matrix=r["m_matrix"], refit_loglik=r.get("refit_loglik"),
        )
        name = r["estimator"]
        (cfg.out / f"graph_{name}.json").write_text(artifacts.dumps(doc) + "\n", encoding="utf-8")
        (cfg.out / f"precision_{name}.csv").write_text(
            artifacts.precision_csv(r["precision"], data.columns), encoding="utf-8"
        )
        (cfg.out / f"graph_{name}.dot").write_text(artifacts.dot_graph(r["edges"], data.columns), encoding="utf-8")
    (cfg.out / "report.txt").write_text(_report(cfg, data, s, projected, results), encoding="utf-8")
    return EXIT_OK


# --------------------------------------------------------------------------
# simulate

_FAMILY = re.compile(r"^\s*([A-Za-z_]\w*)\s*(?:\((.*)\))?\s*$")
_TRANSFORMS = {
    "identity": lambda v: v,
    "exp": np.exp,
    "cube": lambda v: v ** 3,
    "cbrt": np.cbrt,
}


def parse_family(text):
    """Parse ``name(key=value, ...)`` into an elliptical or transelliptical spec.

    Families: ``gaussian``, ``t`` (needs ``k``), ``laplace``.  Keys: ``d``
    (default 2), ``rho`` (default 0), ``graph=equi|chain`` (equicorrelation or
    ``rho**|i-j|``), ``transform=identity|exp|cube|cbrt`` applied to every
    coordinate.
    """
    m = _FAMILY.match(text or "")
    if not m:
        raise InputError(f"cannot parse family {text!r}")
    name = m.group(1).lower()
    opts = {}
    for part in (m.group(2) or "").split(","):
        if not part.strip():
            continue
        key, eq, val = part.partition("=")
        if not eq:
            raise InputError(f"family arguments must be key=value, got {part.strip()!r}")
        opts[key.strip().lower()] = val.strip()
    allowed = {"d", "rho", "graph", "transform"} | ({"k"} if name == "t" else set())
    if name not in ("gaussian", "t", "laplace"):
        raise InputError(f"unknown family {name!r}; choose gaussian, t or laplace")
    unknown = set(opts) - allowed
    if unknown:
        raise InputError(f"unknown {name} parameters: {sorted(unknown)}")
    try:
        d = int(opts.get("d", 2))
        rho = float(opts.get("rho", 0.0))
        k = float(opts["k"]) if name == "t" else None
    except KeyError:
        raise InputError("t family needs k") from None
    except ValueError as exc:
        raise InputError(f"bad numeric value in {text!r}: {exc}") from None
    if d < 1:
        raise InputError("d must be positive")
    graph = opts.get("graph", "equi")
    if graph == "equi":
        sigma = np.full((d, d), rho)
        np.fill_diagonal(sigma, 1.0)
    elif graph == "chain":
        idx = np.arange(d)
        sigma = rho ** np.abs(idx[:, None] - idx[None, :])
    else:
        raise InputError(f"graph must be equi or chain, got {graph!r}")
    transform = opts.get("transform", "identity")
    if transform not in _TRANSFORMS:
        raise InputError(f"transform must be one of {sorted(_TRANSFORMS)}, got {transform!r}")
    if name == "t":
        if not k > 0:
            raise InputError("t family needs k > 0")
        mixing = ChiSqOverK(k)
    else:
        mixing = Exponential(1.0) if name == "laplace" else Constant(1.0)
    try:
        base = EllipticalSpec(np.zeros(d), sigma, mixing)
    except TransellError as exc:
        raise InputError(f"scale matrix is not positive definite for rho={rho}, d={d}: {exc}") from None
    if transform == "identity":
        return base
    return TransellipticalSpec(base, [_TRANSFORMS[transform]] * d)


def cmd_simulate(family, n, seed, out):
    if n < 1:
        raise InputError("--n must be positive")
    spec = parse_family(family)
    if isinstance(spec, TransellipticalSpec):
        data = sample_transelliptical(spec, n, seed)
    else:
        data = sample_elliptical(spec, n, seed)
    out = Path(out)
    if out.parent and not out.parent.exists():
        out.parent.mkdir(parents=True)
    write_csv(out, data)
    return EXIT_OK


# --------------------------------------------------------------------------
# mtp2


def equicorrelated_precision(d, rho_star):
    """Unit-diagonal ``K`` with every partial correlation equal to ``rho_star``."""
    k = np.full((d, d), -float(rho_star))
    np.fill_diagonal(k, 1.0)
    return k


def mtp2_summary(generator, d, rho_star=None):
    g = parse_generator(generator, d)
    window = mtp2_dimension_window(g, d)
    doc = {
        "generator": g.name,
        "d": d,
        "exact": window.exact,
        "ratio_range": [window.ratio_inf, window.ratio_sup],
        "rho_star_interval": None if window.rho_star_bounds is None else list(window.rho_star_bounds),
        "dimension_window": list(window.window),
        "dimension_feasible": window.feasible,
        "dim_bound": window.dim_bound,
        "marginal": window.marginal,
    }
    if window.rho_star_bounds is None:
        verdict = "infeasible for all scale matrices"
    elif window.dim_bound == "all d":
        verdict = "feasible for all d"
    elif not window.feasible:
        verdict = f"infeasible in dimension {d}"
    else:
        lo = window.rho_star_bounds[0]
        verdict = f"feasible in dimension {d} with rho_* >= {lo:.6g}"
    if rho_star is not None:
        try:
            k = cholesky(equicorrelated_precision(d, rho_star))
        except TransellError:
            raise InputError(f"rho_* = {rho_star} gives no positive definite scale in d = {d} "
                             f"(needs rho_* < 1/(d-1))") from None
        fixed = mtp2_check_fixed_scale(g, k)
        doc["fixed_scale"] = {"rho_star": rho_star, "feasible": fixed.feasible,
                              "window": list(fixed.window), "marginal": fixed.marginal}
        verdict += f"; at rho_* = {rho_star:g}: {'feasible' if fixed.feasible else 'infeasible'}"
        if fixed.feasible and not window.feasible:
            verdict += " (pairwise window only; the dimension condition fails)"
    doc["verdict"] = verdict
    return doc


def _mtp2_text(doc):
    lo, hi = doc["ratio_range"]
    wlo, whi = doc["dimension_window"]
    rs = doc["rho_star_interval"]
    lines = [
        f"generator: {doc['generator']}  (d = {doc['d']}, {'exact' if doc['exact'] else 'numerical, not a proof'})",
        f"verdict: {doc['verdict']}",
        f"ratio t*phi''/phi' range: [{lo:.6g}, {hi:.6g}]",
        "admissible rho_*: " + ("none" if rs is None else f"[{rs[0]:.6g}, 1)"),
        f"dimension window (-1/d, 1/(d-2)): ({wlo:.6g}, {whi:.6g}) -> "
        f"{'inside' if doc['dimension_feasible'] else 'outside'}; largest feasible d: {doc['dim_bound']}",
    ]
    if doc["marginal"]:
        lines.append("note: the ratio range touches a window boundary (marginal case)")
    return "\n".join(lines) + "\n"


def cmd_mtp2(generator, d, rho_star=None, as_json=False, stream=None):
    stream = stream or sys.stdout
    if d < 2:
        raise InputError("--d must be at least 2")
    try:
        doc = mtp2_summary(generator, d, rho_star)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    stream.write(artifacts.dumps(doc) + "\n" if as_json else _mtp2_text(doc))
    return EXIT_OK


# --------------------------------------------------------------------------
# entry point


def build_parser():
    p = argparse.ArgumentParser(prog="transell", description="Partial correlation graphs for (trans)elliptical data.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="estimate graphs from a CSV data matrix")
    f.add_argument("--input", required=True, type=Path)
    f.add_argument("--out", required=True, type=Path)
    f.add_argument("--method", choices=["pearson", "skeptic"], default="skeptic")
    f.add_argument("--estimator", choices=["glasso", "ppg", "both"], default="glasso")
    f.add_argument("--lambda-points", type=int, default=30)
    f.add_argument("--gamma", type=float, default=0.5)
    f.add_argument("--threshold", type=float, default=1e-8)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--tail-report", action="store_true")
    f.add_argument("--mahalanobis", action="store_true")
    f.add_argument("--audit", action="store_true")

    s = sub.add_parser("simulate", help="write a simulated sample as CSV")
    s.add_argument("--family", required=True)
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True, type=Path)

    m = sub.add_parser("mtp2", help="MTP2 feasibility of a density generator")
    m.add_argument("--generator", required=True)
    m.add_argument("--d", type=int, required=True)
    m.add_argument("--rho-star", type=float, default=None)
    m.add_argument("--json", action="store_true")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "fit":
            cfg = PipelineConfig(
                args.input, args.out, args.method, args.estimator, args.lambda_points, args.gamma,
                args.threshold, args.seed, args.tail_report, args.mahalanobis, args.audit,
            )
            return cmd_fit(cfg)
        if args.command == "simulate":
            return cmd_simulate(args.family, args.n, args.seed, args.out)
        return cmd_mtp2(args.generator, args.d, args.rho_star, args.json)
    except InputError as exc:
        print(f"transell: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NotConverged as exc:
        print(f"transell: solver failed: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except TransellError as exc:
        print(f"transell: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
