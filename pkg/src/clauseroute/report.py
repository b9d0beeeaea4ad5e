"""Statistics tables computed from a run store and its zoo.

Every table is a deterministic function of (records, zoo, flags); numbers
are written with fixed decimals so reruns are byte-identical.
"""

from __future__ import annotations

import csv
import io
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .agentio.store import RunRecord
from .dirkey import CompilerConfig, KeyKind, classify, eval_predicate, target_predicate
from .postcond import LABEL_ORDER, Label, UndefinedCoverageError, coverage_precision, format_outcome_table, \
    tally_outcomes
from .prior import build_library, select_model
from .prior.report import format_prior_report
from .prior.runs import RunMatrix
from .prior.selection import DEFAULT_FOLDS, DEFAULT_GRID, evaluate
from .zoo import Zoo, nearest_rank

KEY_OBJECTIVES = (
    "Intelligence",
    "Speed",
    "Input Price",
    "Cached Price",
    "Output Price",
    "Context Window",
    "Max Output",
)


def _fmt(x: float | None, digits: int = 4) -> str:
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return ""
    return f"{x:.{digits}f}"


def _csv(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def nf_case_s_matrix(records: Sequence[RunRecord], config: CompilerConfig | None = None) -> RunMatrix:
    """Case S masks of no-feedback runs, in store order."""
    nf = [r for r in records if classify(r.direction_key, config).kind is KeyKind.NF]
    return RunMatrix.from_masks([r.run_id for r in nf], [r.mask.bits for r in nf], [Label.CASE_S])


def outcome_csv(records: Sequence[RunRecord]) -> tuple[str, str]:
    rows = tally_outcomes((r.direction_key, r.postcondition) for r in records)
    header = ["direction_key"]
    for label in LABEL_ORDER:
        header += [label.value.lower(), f"{label.value.lower()}_pct"]
    header += ["fail", "count"]
    body = []
    for row in rows:
        line: list[object] = [row.key]
        for label in LABEL_ORDER:
            line += [row.counts[label], f"{row.percent(label):.2f}"]
        line += [row.fail, row.total]
        body.append(line)
    return _csv(header, body), format_outcome_table(rows)


def coverage_precision_csv(records: Sequence[RunRecord], zoo: Zoo, config: CompilerConfig | None = None) -> str:
    """Coverage and precision per language-feedback group against the target set."""
    groups: dict[str, dict[str, list]] = {}
    for rec in records:
        key = classify(rec.direction_key, config)
        if key.kind not in (KeyKind.LF_PD, KeyKind.LF_GD) or rec.current_endpoint_id is None:
            continue
        g = groups.setdefault(key.kind.value, {"cov": [], "prec": [], "hit": [], "t": [], "c": [], "skipped": []})
        try:
            pred = target_predicate(key, zoo, config)
        except ValueError:
            g["skipped"].append(rec.run_id)
            continue
        current = zoo.endpoint(rec.current_endpoint_id)
        target = np.array([eval_predicate(pred, e, current, zoo) for e in zoo.endpoints], dtype=bool)
        try:
            cov, prec = coverage_precision(rec.mask, target)
        except UndefinedCoverageError:
            g["skipped"].append(rec.run_id)
            continue
        chosen = rec.mask.bits.astype(bool)
        g["cov"].append(cov)
        if prec is not None:
            g["prec"].append(prec)
        g["hit"].append(int(np.sum(chosen & target)))
        g["t"].append(int(target.sum()))
        g["c"].append(int(chosen.sum()))

    header = ["group", "runs", "skipped_empty_target", "empty_output", "coverage_mean", "coverage_pooled",
              "precision_mean", "precision_pooled"]
    rows = []
    for name in sorted(groups):
        g = groups[name]
        n = len(g["cov"])
        hits, t_total, c_total = sum(g["hit"]), sum(g["t"]), sum(g["c"])
        rows.append([
            name, n, len(g["skipped"]), n - len(g["prec"]),
            _fmt(float(np.mean(g["cov"])) if n else None),
            _fmt(hits / t_total if t_total else None),
            _fmt(float(np.mean(g["prec"])) if g["prec"] else None),
            _fmt(hits / c_total if c_total else None),
        ])
    return _csv(header, rows)


def selection_frequency_csv(zoo: Zoo, runs: RunMatrix | None) -> str:
    header = ["endpoint_id", "model", "selected", "runs", "rate"]
    if runs is None:
        return _csv(header, [])
    counts = runs.bits.sum(axis=0)
    rows = [[e.id, e.name, int(counts[i]), runs.n_runs, _fmt(counts[i] / runs.n_runs)]
            for i, e in enumerate(zoo.endpoints)]
    return _csv(header, rows)


def set_size_csv(records: Sequence[RunRecord]) -> str:
    """|C| statistics over Case S runs, per direction key."""
    by_key: dict[str, list[int]] = {}
    totals: dict[str, int] = {}
    for rec in records:
        totals[rec.direction_key] = totals.get(rec.direction_key, 0) + 1
        if rec.label is Label.CASE_S:
            by_key.setdefault(rec.direction_key, []).append(rec.mask.size)
    header = ["direction_key", "runs", "case_s_runs", "mean", "median", "std", "min", "max"]
    rows = []
    for key in sorted(totals):
        sizes = by_key.get(key, [])
        if sizes:
            std = statistics.pstdev(sizes)
            rows.append([key, totals[key], len(sizes), _fmt(statistics.fmean(sizes)), _fmt(statistics.median(sizes)),
                         _fmt(std), min(sizes), max(sizes)])
        else:
            rows.append([key, totals[key], 0, "", "", "", "", ""])
    return _csv(header, rows)


def _summary(values: list[float]) -> list[str]:
    if not values:
        return ["", "", "", ""]
    return [_fmt(float(np.mean(values))), _fmt(nearest_rank(values, 0.25)), _fmt(nearest_rank(values, 0.5)),
            _fmt(nearest_rank(values, 0.75))]


def attribute_comparison_csv(zoo: Zoo, runs: RunMatrix | None) -> str:
    """Mean and quartiles of key objectives: whole zoo vs pooled NF Case S selections."""
    header = ["attribute", "zoo_mean", "zoo_q25", "zoo_median", "zoo_q75",
              "nf_mean", "nf_q25", "nf_median", "nf_q75"]
    rows = []
    for attr in KEY_OBJECTIVES:
        column = zoo.column(attr)
        zoo_vals = [float(v) for v in column if v is not None]
        nf_vals: list[float] = []
        if runs is not None:
            for m, count in enumerate(runs.bits.sum(axis=0)):
                if column[m] is not None:
                    nf_vals += [float(column[m])] * int(count)
        rows.append([attr, *_summary(zoo_vals), *_summary(nf_vals)])
    return _csv(header, rows)


def prevalence_csv(zoo: Zoo, runs: RunMatrix | None) -> str:
    """Share of reasoning-enabled and cached-input endpoints, zoo vs NF selections."""
    reasoning = np.array([e["Reasoning"] == 1 for e in zoo.endpoints])
    cached = np.array([e["Cached Price"] is not None for e in zoo.endpoints])
    header = ["feature", "zoo_share", "nf_selection_share"]
    rows = []
    counts = runs.bits.sum(axis=0) if runs is not None else None
    for name, flag in (("reasoning_enabled", reasoning), ("cached_input_available", cached)):
        nf = _fmt(float(counts[flag].sum() / counts.sum())) if counts is not None and counts.sum() else ""
        rows.append([name, _fmt(float(flag.mean())), nf])
    return _csv(header, rows)


@dataclass
class ReportBundle:
    files: dict[str, str] = field(default_factory=dict)
    notices: list[str] = field(default_factory=list)

    @property
    def empty(self) -> bool:
        return not self.files

    def write(self, out_dir: str | Path) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        written = []
        for name in sorted(self.files):
            path = out / name
            path.write_text(self.files[name], encoding="utf-8")
            written.append(path)
        return written


def build_report(
    records: Sequence[RunRecord],
    zoo: Zoo,
    config: CompilerConfig | None = None,
    grid: Sequence[float] = DEFAULT_GRID,
    n_folds: int = DEFAULT_FOLDS,
) -> ReportBundle:
    bundle = ReportBundle()
    if not records:
        bundle.notices.append("empty store: nothing to report")
        return bundle

    outcome_data, outcome_text = outcome_csv(records)
    bundle.files["outcome_table.csv"] = outcome_data
    bundle.files["outcome_table.txt"] = outcome_text
    bundle.files["coverage_precision.csv"] = coverage_precision_csv(records, zoo, config)
    bundle.files["set_size_stats.csv"] = set_size_csv(records)

    try:
        nf_runs: RunMatrix | None = nf_case_s_matrix(records, config)
    except ValueError:
        nf_runs = None
        bundle.notices.append("no no-feedback Case S runs: NF tables are empty")
    bundle.files["selection_frequencies.csv"] = selection_frequency_csv(zoo, nf_runs)
    bundle.files["attribute_comparison.csv"] = attribute_comparison_csv(zoo, nf_runs)
    bundle.files["prevalence.csv"] = prevalence_csv(zoo, nf_runs)

    if nf_runs is not None and nf_runs.n_runs >= max(2, n_folds):
        lib = build_library(zoo)
        sel, metrics = evaluate(nf_runs, lib, grid, n_folds=n_folds)
        bundle.files["prior_report.txt"] = format_prior_report(
            sel.model, nf_runs.n_runs, zoo.M, metrics, cv_table=sel.cv_table
        )
    elif nf_runs is not None:
        bundle.notices.append(f"only {nf_runs.n_runs} NF Case S runs: prior fit skipped")
    return bundle


__all__ = ["ReportBundle", "build_report", "nf_case_s_matrix", "select_model"]
