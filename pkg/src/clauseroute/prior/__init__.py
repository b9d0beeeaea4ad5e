"""Implicit no-feedback prior: predicate library, sparse logistic fit, diagnostics."""

from .diagnostics import (
    UndefinedMetricError,
    auc_from_counts,
    auc_from_scores,
    pair_auc,
    prior_score,
    spearman,
    spearman_selection_rate,
    topk_recovery,
)
from .fit import PriorModel, fit, fit_counts, objective
from .library import PREDICATE_NAMES, LibraryBuildError, PredicateLibrary, build_library
from .runs import ConditioningError, RunMatrix, random_case_s_runs, simulate_runs
from .selection import (
    DEFAULT_GRID,
    FoldCountError,
    ModelSelection,
    PermutationResult,
    evaluate,
    permutation_test,
    select_model,
)

__all__ = [
    "ConditioningError",
    "DEFAULT_GRID",
    "FoldCountError",
    "LibraryBuildError",
    "ModelSelection",
    "PREDICATE_NAMES",
    "PermutationResult",
    "PredicateLibrary",
    "PriorModel",
    "RunMatrix",
    "UndefinedMetricError",
    "auc_from_counts",
    "auc_from_scores",
    "build_library",
    "evaluate",
    "fit",
    "fit_counts",
    "objective",
    "pair_auc",
    "permutation_test",
    "prior_score",
    "random_case_s_runs",
    "select_model",
    "simulate_runs",
    "spearman",
    "spearman_selection_rate",
    "topk_recovery",
]
