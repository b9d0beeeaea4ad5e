"""L1-regularized logistic regression over run-endpoint inclusion pairs.

Every run shares the same endpoint feature rows, so the pair-level loss
collapses to per-endpoint counts: endpoint m was selected k_m times out of
n_m runs. The minimized objective is

    sum_m [ n_m * softplus(z_m) - k_m * z_m ]  +  (1 / R) * ||w||_1,
    z_m = b + psi_m . w,

with the intercept b unpenalized. This is the pair-summed loss, so R plays
the role of an inverse regularization strength as in liblinear-style solvers.

The solver is a proximal Newton method: a weighted-lasso quadratic model is
minimized by cyclic coordinate descent, followed by a backtracking line
search on the true objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .library import PredicateLibrary
from .runs import RunMatrix

INTERCEPT_FLOOR = -30.0
INTERCEPT_CEIL = 30.0
# relative objective gain below which the outer loop stops; well inside the 1e-8 contract
RELATIVE_GAIN_TOL = 1e-15
MAX_OUTER = 200
MAX_INNER = 2000


@njit(cache=True)
def _softplus(z):
    return max(z, 0.0) + np.log1p(np.exp(-abs(z)))


@njit(cache=True)
def _objective(X, k, n, b, w, lam):
    total = 0.0
    for m in range(X.shape[0]):
        z = b
        for j in range(X.shape[1]):
            z += X[m, j] * w[j]
        total += n[m] * _softplus(z) - k[m] * z
    return total + lam * np.sum(np.abs(w))


@njit(cache=True)
def _prox_newton(X, k, n, lam, b0, tol, max_outer, max_inner):
    M, J = X.shape
    b = b0
    w = np.zeros(J)
    f = _objective(X, k, n, b, w, lam)
    col_sq = np.zeros(J)
    n_outer = 0
    for outer in range(max_outer):
        n_outer = outer + 1
        z = np.empty(M)
        for m in range(M):
            z[m] = b
            for j in range(J):
                z[m] += X[m, j] * w[j]
        p = 1.0 / (1.0 + np.exp(-z))
        h = n * p * (1.0 - p)
        for m in range(M):
            if h[m] < 1e-12:
                h[m] = 1e-12
        g = n * p - k
        for j in range(J):
            col_sq[j] = np.sum(h * X[:, j] * X[:, j])

        nb = b
        nw = w.copy()
        r = np.zeros(M)  # change in linear predictor under the quadratic model
        resid = g.copy()  # g + h * r, kept in sync with r
        h_sum = np.sum(h)
        inner_tol = 1e-14 * max(1.0, abs(f))
        for _ in range(max_inner):
            biggest = 0.0
            d = -np.sum(resid) / h_sum
            nb += d
            for m in range(M):
                r[m] += d
                resid[m] += h[m] * d
            biggest = max(biggest, h_sum * d * d)
            for j in range(J):
                a = col_sq[j]
                if a <= 0.0:
                    continue
                grad = 0.0
                for m in range(M):
                    grad += X[m, j] * resid[m]
                cur = nw[j]
                t = cur - grad / a
                shrunk = max(abs(t) - lam / a, 0.0)
                new = shrunk if t >= 0 else -shrunk
                d = new - cur
                if d != 0.0:
                    nw[j] = new
                    for m in range(M):
                        if X[m, j] != 0.0:
                            r[m] += d * X[m, j]
                            resid[m] += h[m] * d * X[m, j]
                    biggest = max(biggest, a * d * d)
            if biggest < inner_tol:
                break

        db = nb - b
        dw = nw - w
        decrease = np.sum(g * r) + lam * (np.sum(np.abs(nw)) - np.sum(np.abs(w)))
        step = 1.0
        accepted = False
        f_new = f
        cb = b
        cw = w
        while step > 1e-12:
            cb = b + step * db
            cw = w + step * dw
            f_new = _objective(X, k, n, cb, cw, lam)
            if f_new <= f + 1e-4 * step * decrease:
                accepted = True
                break
            step *= 0.5
        if not accepted or f_new > f:
            break
        b = cb
        w = cw
        gain = f - f_new
        f = f_new
        if gain <= tol * max(1.0, abs(f)):
            break
    return b, w, f, n_outer


@dataclass(frozen=True, eq=False)
class PriorModel:
    intercept: float
    weights: np.ndarray
    names: tuple[str, ...]
    reg_strength: float
    objective: float = float("nan")
    diagnostics: dict = field(default_factory=dict)

    @property
    def nonzero(self) -> int:
        return int(np.count_nonzero(self.weights))

    def linear_predictor(self, lib: PredicateLibrary) -> np.ndarray:
        return self.intercept + lib.matrix @ self.weights

    def probabilities(self, lib: PredicateLibrary) -> np.ndarray:
        return 1.0 / (1.0 + np.exp(-self.linear_predictor(lib)))

    def weight(self, name: str) -> float:
        return float(self.weights[self.names.index(name)])

    def as_dict(self) -> dict[str, float]:
        return {n: float(w) for n, w in zip(self.names, self.weights)}


def objective(X: np.ndarray, k: np.ndarray, n: np.ndarray, b: float, w: np.ndarray, R: float) -> float:
    """Pair-summed logistic loss plus (1/R)*||w||_1."""
    return float(_objective(np.asarray(X, float), np.asarray(k, float), np.asarray(n, float), float(b),
                            np.asarray(w, float), 1.0 / R))


def _column_groups(X: np.ndarray) -> tuple[np.ndarray, list[list[int]]]:
    """Collapse identical columns, keeping first-appearance order."""
    seen: dict[bytes, int] = {}
    groups: list[list[int]] = []
    for j in range(X.shape[1]):
        key = X[:, j].tobytes()
        if key in seen:
            groups[seen[key]].append(j)
        else:
            seen[key] = len(groups)
            groups.append([j])
    reps = np.array([g[0] for g in groups], dtype=int)
    return X[:, reps], groups


def fit_counts(
    X: np.ndarray,
    k: np.ndarray,
    n: np.ndarray,
    R: float,
    names: tuple[str, ...] | None = None,
) -> PriorModel:
    """Fit from per-endpoint selection counts ``k`` out of ``n`` runs.

    Identical feature columns are fitted once and share the weight equally;
    this leaves the objective unchanged and picks the minimum-norm split among
    otherwise tied optima.
    """
    if R <= 0:
        raise ValueError("regularization strength R must be positive")
    X = np.asarray(X, dtype=float)
    k = np.asarray(k, dtype=float)
    n = np.asarray(n, dtype=float)
    J = X.shape[1]
    names = names or tuple(f"psi_{j}" for j in range(J))
    rate = k.sum() / n.sum()

    if rate <= 0.0 or rate >= 1.0:
        b = INTERCEPT_FLOOR if rate <= 0.0 else INTERCEPT_CEIL
        w = np.zeros(J)
        return PriorModel(b, w, names, R, objective(X, k, n, b, w, R))

    b0 = float(np.log(rate / (1.0 - rate)))
    Xc, groups = _column_groups(X)
    b, wc, f, _ = _prox_newton(Xc, k, n, 1.0 / R, b0, RELATIVE_GAIN_TOL, MAX_OUTER, MAX_INNER)
    w = np.zeros(J)
    for value, members in zip(wc, groups):
        for j in members:
            w[j] = value / len(members)
    b = float(np.clip(b, INTERCEPT_FLOOR, INTERCEPT_CEIL))
    return PriorModel(b, w, names, R, float(f))


def fit(runs: RunMatrix, lib: PredicateLibrary, R: float) -> PriorModel:
    if runs.n_runs < 1:
        raise ValueError("need at least one run to fit")
    k, n = runs.counts()
    return fit_counts(lib.matrix, k, n, R, lib.names)
