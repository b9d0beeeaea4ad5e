"""Group cross-validated choice of R and the set-size-preserving permutation test."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .diagnostics import (
    UndefinedMetricError,
    auc_from_counts,
    pair_auc,
    spearman_selection_rate,
    topk_recovery,
)
from .fit import PriorModel, fit, fit_counts
from .library import PredicateLibrary
from .runs import RunMatrix

log = logging.getLogger(__name__)

DEFAULT_GRID: tuple[float, ...] = (0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0)
DEFAULT_FOLDS = 5
AUC_WINDOW = 0.02
DEFAULT_TOP_K = 8
DEFAULT_N_PERM = 199
MIN_N_PERM = 19


class FoldCountError(ValueError):
    pass


@dataclass(frozen=True)
class CvRow:
    R: float
    cv_auc: float
    nonzero: int
    chosen: bool = False


@dataclass(frozen=True, eq=False)
class ModelSelection:
    R: float
    model: PriorModel
    cv_table: tuple[CvRow, ...]


def group_folds(n_runs: int, n_folds: int) -> np.ndarray:
    """Fold id per run; whole runs go to one fold, assigned round-robin."""
    return np.arange(n_runs) % n_folds


def select_model(
    runs: RunMatrix,
    lib: PredicateLibrary,
    grid: Sequence[float] = DEFAULT_GRID,
    n_folds: int = DEFAULT_FOLDS,
) -> ModelSelection:
    """Pick the sparsest refit model whose CV pair-AUC is within 0.02 of the best."""
    grid = [float(R) for R in grid]
    if not grid:
        raise ValueError("regularization grid is empty")
    if runs.n_runs < 2:
        raise ValueError("model selection needs at least two runs")
    if runs.n_runs < n_folds:
        raise FoldCountError(f"{runs.n_runs} runs cannot fill {n_folds} folds")

    folds = group_folds(runs.n_runs, n_folds)
    splits = []
    for f in range(n_folds):
        k_train, n_train = runs.counts(folds != f)
        k_test, n_test = runs.counts(folds == f)
        splits.append((k_train, n_train, k_test, n_test - k_test))

    cv_aucs, refits = [], []
    for R in grid:
        scores = []
        for k_train, n_train, pos, neg in splits:
            fold_model = fit_counts(lib.matrix, k_train, n_train, R, lib.names)
            try:
                scores.append(auc_from_counts(fold_model.linear_predictor(lib), pos, neg))
            except UndefinedMetricError:
                continue
        cv_aucs.append(float(np.mean(scores)) if scores else float("nan"))
        refits.append(fit(runs, lib, R))

    best = np.nanmax(cv_aucs) if not np.all(np.isnan(cv_aucs)) else float("nan")
    eligible = [
        i for i, auc in enumerate(cv_aucs)
        if np.isnan(best) or (not np.isnan(auc) and auc >= best - AUC_WINDOW - 1e-12)
    ]
    pick = min(eligible, key=lambda i: (refits[i].nonzero, grid[i]))
    table = tuple(
        CvRow(R, auc, model.nonzero, i == pick)
        for i, (R, auc, model) in enumerate(zip(grid, cv_aucs, refits))
    )
    return ModelSelection(grid[pick], refits[pick], table)


METRICS = ("auc", "topk", "spearman")


def evaluate(
    runs: RunMatrix,
    lib: PredicateLibrary,
    grid: Sequence[float] = DEFAULT_GRID,
    k: int = DEFAULT_TOP_K,
    n_folds: int = DEFAULT_FOLDS,
) -> tuple[ModelSelection, dict[str, float]]:
    """select_model plus in-sample diagnostics; undefined metrics come back NaN."""
    sel = select_model(runs, lib, grid, n_folds)
    metrics: dict[str, float] = {}
    try:
        metrics["auc"] = pair_auc(sel.model, runs, lib)
    except UndefinedMetricError:
        metrics["auc"] = float("nan")
    metrics["topk"] = float(topk_recovery(sel.model, runs, lib, k))
    try:
        metrics["spearman"] = spearman_selection_rate(sel.model, runs, lib)
    except UndefinedMetricError:
        metrics["spearman"] = float("nan")
    return sel, metrics


@dataclass(frozen=True, eq=False)
class PermutationResult:
    observed: dict[str, float]
    null: dict[str, np.ndarray]
    p_values: dict[str, float]
    n_perm: int
    seed: int
    selection: ModelSelection | None = field(default=None)

    @property
    def null_means(self) -> dict[str, float]:
        return {m: float(np.nanmean(v)) if np.any(~np.isnan(v)) else float("nan") for m, v in self.null.items()}

    @property
    def p_auc(self) -> float:
        return self.p_values["auc"]

    @property
    def p_topk(self) -> float:
        return self.p_values["topk"]

    @property
    def p_spearman(self) -> float:
        return self.p_values["spearman"]


def add_one_p_value(observed: float, null: np.ndarray) -> float:
    """(1 + #{null >= observed}) / (1 + n); NaN nulls never count as exceeding."""
    if np.isnan(observed):
        return float("nan")
    with np.errstate(invalid="ignore"):
        hits = int(np.sum(null >= observed - 1e-12))
    return (1 + hits) / (1 + len(null))


def permutation_test(
    runs: RunMatrix,
    lib: PredicateLibrary,
    grid: Sequence[float] = DEFAULT_GRID,
    n_perm: int = DEFAULT_N_PERM,
    seed: int = 0,
    k: int = DEFAULT_TOP_K,
    n_folds: int = DEFAULT_FOLDS,
) -> PermutationResult:
    """Null distribution from independent within-run shuffles of endpoint identity.

    Each trial draws from its own generator seeded by (seed, trial), so trials
    are reproducible individually and in any order.
    """
    if n_perm < MIN_N_PERM:
        raise ValueError(f"n_perm must be at least {MIN_N_PERM}")
    selection, observed = evaluate(runs, lib, grid, k, n_folds)
    null = {m: np.empty(n_perm) for m in METRICS}
    for t in range(n_perm):
        rng = np.random.default_rng([seed, t])
        _, metrics = evaluate(runs.permuted(rng), lib, grid, k, n_folds)
        for m in METRICS:
            null[m][t] = metrics[m]
        if (t + 1) % 50 == 0:
            log.debug("permutation trial %d/%d", t + 1, n_perm)
    p_values = {m: add_one_p_value(observed[m], null[m]) for m in METRICS}
    return PermutationResult(observed, null, p_values, n_perm, seed, selection)
