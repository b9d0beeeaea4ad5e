"""Plain-text prior report.

Layout (tab-separated key/value lines, sections separated by blank lines)::

    # implicit clause weights
    R           0.02
    intercept   -1.8043
    nonzero     6/19
    runs        111
    endpoints   25

    clause      weight          <- nonzero weights, largest first
    maxout_ge_p75   0.9317
    ...

    diagnostic  value           <- optional
    pair_auc    0.8839
    ...

    R   cv_auc  nonzero chosen  <- optional CV table
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from .fit import PriorModel
from .selection import CvRow, PermutationResult


def _num(x: float, digits: int = 4) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    text = f"{x:.{digits}f}"
    return "0.0000" if text == "-0.0000" else text


def format_prior_report(
    model: PriorModel,
    n_runs: int | None = None,
    n_endpoints: int | None = None,
    diagnostics: Mapping[str, float] | None = None,
    k: int = 8,
    permutation: PermutationResult | None = None,
    cv_table: Sequence[CvRow] | None = None,
) -> str:
    lines = [
        "# implicit clause weights",
        f"R\t{model.reg_strength:g}",
        f"intercept\t{_num(model.intercept)}",
        f"nonzero\t{model.nonzero}/{len(model.weights)}",
    ]
    if n_runs is not None:
        lines.append(f"runs\t{n_runs}")
    if n_endpoints is not None:
        lines.append(f"endpoints\t{n_endpoints}")

    lines += ["", "clause\tweight"]
    order = sorted(np.flatnonzero(model.weights), key=lambda j: (-abs(model.weights[j]), j))
    lines += [f"{model.names[j]}\t{_num(model.weights[j])}" for j in order]

    if diagnostics:
        lines += ["", "diagnostic\tvalue"]
        if "auc" in diagnostics:
            lines.append(f"pair_auc\t{_num(diagnostics['auc'])}")
        if "spearman" in diagnostics:
            lines.append(f"spearman\t{_num(diagnostics['spearman'])}")
        if "topk" in diagnostics:
            lines.append(f"top{k}_recovery\t{int(diagnostics['topk'])}/{k}")

    if permutation is not None:
        means = permutation.null_means
        lines += ["", f"permutation\tn_perm={permutation.n_perm}\tseed={permutation.seed}",
                  "metric\tobserved\tnull_mean\tp_value"]
        for metric in ("auc", "topk", "spearman"):
            lines.append(
                f"{metric}\t{_num(permutation.observed[metric])}\t{_num(means[metric])}\t"
                f"{_num(permutation.p_values[metric])}"
            )

    if cv_table:
        lines += ["", "R\tcv_auc\tnonzero\tchosen"]
        lines += [f"{row.R:g}\t{_num(row.cv_auc)}\t{row.nonzero}\t{'*' if row.chosen else ''}".rstrip()
                  for row in cv_table]
    return "\n".join(lines) + "\n"


def parse_prior_report(text: str) -> tuple[float, dict[str, float], float]:
    """Recover (intercept, nonzero weights, R) from a report."""
    intercept = None
    R = float("nan")
    weights: dict[str, float] = {}
    in_clauses = False
    for line in text.splitlines():
        if not line.strip():
            in_clauses = False
            continue
        parts = line.split("\t")
        if parts[0] == "clause":
            in_clauses = True
            continue
        if in_clauses:
            weights[parts[0]] = float(parts[1])
        elif parts[0] == "intercept":
            intercept = float(parts[1])
        elif parts[0] == "R" and len(parts) == 2:
            R = float(parts[1])
    if intercept is None:
        raise ValueError("report has no intercept line")
    return intercept, weights, R
