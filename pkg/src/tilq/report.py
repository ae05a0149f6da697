"""Serialization of solutions and reports to JSON, CSV and text."""

from __future__ import annotations

import csv
import io
import json
from typing import Dict

import numpy as np

from .feedback import FeedbackSolution
from .open_loop import OpenLoopSolution, StandardLQSolution


def jsonable(obj):
    """Recursively convert numpy containers and scalars to plain Python."""
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return obj


def _key(idx) -> str:
    return ",".join(str(i) for i in idx) if isinstance(idx, tuple) else str(idx)


def _family(fam: Dict) -> Dict[str, list]:
    return {_key(k): fam[k].tolist() for k in sorted(fam)}


def open_loop_to_dict(sol: OpenLoopSolution) -> dict:
    return {
        "solution": {
            "P": _family(sol.P),
            "S": _family(sol.S),
            "W_diag": [w.tolist() for w in sol.W_diag],
            "H_diag": [h.tolist() for h in sol.H_diag],
            "H_cross": _family(sol.H_cross),
            "gains": [g.tolist() for g in sol.gains],
            "convexity": [c.tolist() for c in sol.convexity],
        },
        "diagnostics": {
            "constraint_residual": sol.residuals,
            "residual_scale": sol.residual_scales,
            "convexity_min_eig": sol.min_eigs,
            "constraint_ok": sol.constraint_ok,
            "convexity_ok": sol.convexity_ok,
            "failing": sol.failing(),
        },
    }


def feedback_to_dict(sol: FeedbackSolution) -> dict:
    eigs = {str(t): np.linalg.eigvalsh(0.5 * (sol.W_tilde[t, t] + sol.W_tilde[t, t].T)).tolist()
            for t in range(sol.N)}
    return {
        "solution": {
            "Phi": [phi.tolist() for phi in sol.Phi],
            "P_tilde": _family(sol.P_tilde),
            "W_tilde": _family(sol.W_tilde),
            "H_tilde": _family(sol.H_tilde),
        },
        "diagnostics": {
            "constraint_residual": sol.residuals,
            "residual_scale": sol.residual_scales,
            "W_tilde_min_eig": sol.min_eigs,
            "W_tilde_eigenvalues": eigs,
            "constraint_ok": sol.constraint_ok,
            "psd_ok": sol.psd_ok,
            "first_failing": sol.first_failing,
            "failing": sol.failing(),
        },
    }


def standard_to_dict(sol: StandardLQSolution) -> dict:
    return {
        "solution": {
            "t_start": sol.t_start,
            "P": _family(sol.P),
            "W": _family(sol.W),
            "gains": _family(sol.gains),
        },
        "diagnostics": {"W_min_eig": jsonable(sol.min_eigs), "constraint_residual": jsonable(sol.residuals)},
    }


def format_matrix(m, indent: str = "  ") -> str:
    """Rows of a matrix at four decimals."""
    a = np.atleast_2d(np.asarray(m, dtype=float))
    return "\n".join(indent + "  ".join(f"{v:12.4f}" for v in row) for row in a)


def _walk(prefix, obj, out):
    if isinstance(obj, dict):
        for k, v in obj.items():
            _walk(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(obj, list) and obj and all(isinstance(r, list) for r in obj) and \
            all(isinstance(v, (int, float)) for r in obj for v in r):
        out.append((prefix, obj))
    elif isinstance(obj, list) and obj and all(isinstance(v, (dict, list)) for v in obj):
        for i, v in enumerate(obj):
            _walk(f"{prefix}[{i}]", v, out)
    else:
        out.append((prefix, obj))


def render_json(report: dict) -> str:
    return json.dumps(jsonable(report), indent=2, sort_keys=True) + "\n"


def render_csv(report: dict) -> str:
    """Long format: one row per matrix entry or scalar, ``name,row,col,value``."""
    items = []
    _walk("", jsonable(report), items)
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(["name", "row", "col", "value"])
    for name, val in items:
        if isinstance(val, list) and val and isinstance(val[0], list):
            for i, r in enumerate(val):
                for j, v in enumerate(r):
                    wr.writerow([name, i, j, repr(float(v))])
        elif isinstance(val, list):
            for i, v in enumerate(val):
                wr.writerow([name, i, "", v])
        else:
            wr.writerow([name, "", "", val])
    return buf.getvalue()


def render_text(report: dict) -> str:
    items = []
    _walk("", jsonable(report), items)
    lines = []
    for name, val in items:
        if isinstance(val, list) and val and isinstance(val[0], list):
            lines.append(f"{name} =")
            lines.append(format_matrix(val))
        elif isinstance(val, float):
            lines.append(f"{name} = {val:.6g}")
        else:
            lines.append(f"{name} = {val}")
    return "\n".join(lines) + "\n"


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return render_json(report)
    if fmt == "csv":
        return render_csv(report)
    if fmt == "text":
        return render_text(report)
    raise ValueError(f"unknown format {fmt!r}")
