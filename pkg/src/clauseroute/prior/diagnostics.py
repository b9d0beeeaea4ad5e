"""Ranking diagnostics for a fitted prior: pair AUC, Spearman, top-k overlap."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .fit import PriorModel
from .library import PredicateLibrary
from .runs import RunMatrix


class UndefinedMetricError(ValueError):
    pass


def auc_from_counts(scores: np.ndarray, pos: np.ndarray, neg: np.ndarray) -> float:
    """Exact pair AUC when all pairs of endpoint m share ``scores[m]``.

    ``pos[m]``/``neg[m]`` count selected/unselected labels for endpoint m.
    Ties count one half.
    """
    scores = np.asarray(scores, dtype=float)
    pos = np.asarray(pos, dtype=float)
    neg = np.asarray(neg, dtype=float)
    n_pos, n_neg = pos.sum(), neg.sum()
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs at least one positive and one negative label")
    greater = scores[:, None] > scores[None, :]
    equal = scores[:, None] == scores[None, :]
    wins = pos @ greater @ neg + 0.5 * (pos @ equal @ neg)
    return float(wins / (n_pos * n_neg))


def auc_from_scores(scores: np.ndarray, labels: np.ndarray) -> float:
    """Mann-Whitney AUC with average ranks for arbitrary scored labels."""
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUC needs at least one positive and one negative label")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg))


def pair_auc(model: PriorModel, runs: RunMatrix, lib: PredicateLibrary, rows: np.ndarray | None = None) -> float:
    # the linear predictor orders pairs exactly like sigmoid(b + psi.w) without saturation ties
    k, n = runs.counts(rows)
    return auc_from_counts(model.linear_predictor(lib), k, n - k)


def spearman(a: np.ndarray, b: np.ndarray) -> float:
    """Spearman rho with average ranks for ties."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.size < 2 or a.size != b.size:
        raise UndefinedMetricError("need two equal-length vectors of length >= 2")
    ra, rb = rankdata(a), rankdata(b)
    da, db = ra - ra.mean(), rb - rb.mean()
    denom = np.sqrt((da * da).sum() * (db * db).sum())
    if denom == 0:
        raise UndefinedMetricError("zero variance in a ranking")
    return float(np.clip((da * db).sum() / denom, -1.0, 1.0))


def spearman_selection_rate(model: PriorModel, runs: RunMatrix, lib: PredicateLibrary) -> float:
    return spearman(model.linear_predictor(lib), runs.selection_rates())


def top_k(values: np.ndarray, k: int) -> np.ndarray:
    """Indices of the k largest values; ties go to the lowest index."""
    order = np.argsort(-np.asarray(values, dtype=float), kind="stable")
    return order[:k]


def topk_overlap(predicted: np.ndarray, empirical: np.ndarray, k: int) -> int:
    if not 1 <= k <= len(predicted):
        raise ValueError(f"k must be in 1..{len(predicted)}")
    return len(set(top_k(predicted, k).tolist()) & set(top_k(empirical, k).tolist()))


def topk_recovery(model: PriorModel, runs: RunMatrix, lib: PredicateLibrary, k: int = 8) -> int:
    return topk_overlap(model.linear_predictor(lib), runs.selection_rates(), k)


def prior_score(model: PriorModel, lib: PredicateLibrary) -> np.ndarray:
    """Per-endpoint implicit-preference score sum_j w_j psi_j (no intercept)."""
    return lib.matrix @ model.weights
