"""File formats written by the command line tool: graph JSON, precision CSV, DOT."""
import csv
import io
import json
import math

import numpy as np

from .diagnostics import partial_correlations

GRAPH_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "transell partial correlation graph",
    "type": "object",
    "required": ["dim", "n", "method", "estimator", "lambda", "threshold", "columns",
                 "edges", "loglik", "refit_loglik", "ebic", "m_matrix"],
    "additionalProperties": False,
    "properties": {
        "dim": {"type": "integer", "minimum": 1},
        "n": {"type": "integer", "minimum": 1},
        "method": {"enum": ["pearson", "skeptic"]},
        "estimator": {"enum": ["glasso", "ppg"]},
        "lambda": {"type": ["number", "null"], "minimum": 0},
        "threshold": {"type": "number", "minimum": 0},
        "columns": {"type": "array", "items": {"type": "string"}},
        "edges": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["i", "j", "partial_corr"],
                "additionalProperties": False,
                "properties": {
                    "i": {"type": "integer", "minimum": 0},
                    "j": {"type": "integer", "minimum": 1},
                    "partial_corr": {"type": "number", "exclusiveMinimum": -1, "exclusiveMaximum": 1},
                },
            },
        },
        "loglik": {"type": "number"},
        "refit_loglik": {"type": ["number", "null"]},
        "ebic": {"type": "number"},
        "m_matrix": {"type": "boolean"},
    },
}


def fmt_float(x):
    """17 significant digits, so values round-trip and output is byte-stable."""
    x = float(x)
    if not math.isfinite(x):
        return "null"
    text = format(x, ".17g")
    return text if any(c in text for c in ".e") else text + ".0"


def dumps(obj, indent=2, _level=0):
    """Deterministic JSON with fixed float formatting (non-finite floats become null)."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None:
        return {True: "true", False: "false", None: "null"}[obj]
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        items = [pad + dumps(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def graph_edges(k, threshold, positive_only=False):
    """Sorted ``(i, j, partial_corr)`` for ``|K_ij| > threshold`` (or ``-K_ij > threshold``)."""
    k = np.asarray(k, dtype=float)
    pc = partial_correlations(k)
    d = k.shape[0]
    edges = []
    for i in range(d):
        for j in range(i + 1, d):
            v = -k[i, j] if positive_only else abs(k[i, j])
            if v > threshold:
                edges.append((i, j, float(pc[i, j])))
    return edges


def graph_document(*, dim, n, method, estimator, lam, threshold, columns, edges, loglik, ebic, m_matrix,
                   refit_loglik=None):
    """Graph JSON payload.

    ``loglik`` belongs to the emitted precision matrix; ``refit_loglik`` is the
    likelihood EBIC was computed from when that differs (glasso refits).
    """
    return {
        "dim": int(dim),
        "n": int(n),
        "method": method,
        "estimator": estimator,
        "lambda": None if lam is None else float(lam),
        "threshold": float(threshold),
        "columns": list(columns),
        "edges": [{"i": i, "j": j, "partial_corr": r} for i, j, r in edges],
        "loglik": float(loglik),
        "refit_loglik": None if refit_loglik is None else float(refit_loglik),
        "ebic": float(ebic),
        "m_matrix": bool(m_matrix),
    }


def precision_csv(k, columns):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in np.asarray(k, dtype=float):
        w.writerow([fmt_float(v) for v in row])
    return buf.getvalue()


def dot_graph(edges, columns):
    lines = ["graph G {"]
    for i, name in enumerate(columns):
        lines.append(f"  {i} [label={json.dumps(name)}];")
    for i, j, r in edges:
        lines.append(f"  {i} -- {j} [weight={fmt_float(r)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def parse_dot_edges(text):
    """Edge set ``{(i, j)}`` of a DOT file written by :func:`dot_graph`."""
    out = set()
    for line in text.splitlines():
        line = line.strip()
        if "--" in line:
            a, _, rest = line.partition("--")
            b = rest.split("[")[0].strip().rstrip(";")
            i, j = int(a), int(b)
            out.add((min(i, j), max(i, j)))
    return out
