"""Weighted MaxSMT shortlist selection.

Each endpoint m gets a decision bit x_m. Hard clauses force x_m -> l_{m,j};
soft clause j pays w_j when x_m and l_{m,j} both hold; every selected endpoint
costs lambda. Selected-set size is bounded by L <= sum(x) <= U.

The objective is separable per endpoint, so under a pure cardinality budget
the greedy-by-utility choice is exact. :func:`solve_oracle` enumerates every
assignment and exists only to check that claim.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass

import numpy as np

from .dirkey import ConstraintSet, Mode, eval_predicate
from .zoo import Endpoint, Zoo

ORACLE_MAX_M = 20


class SizeGuardError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class MaxSmtInstance:
    M: int
    hard_lits: np.ndarray  # (M, |hard|) uint8
    soft_lits: np.ndarray  # (M, |soft|) uint8
    soft_weights: np.ndarray  # (|soft|,)
    L: int
    U: int
    penalty: float
    mode: Mode = Mode.SHORTLIST

    def __post_init__(self):
        hard = np.asarray(self.hard_lits, dtype=np.uint8).reshape(self.M, -1)
        soft = np.asarray(self.soft_lits, dtype=np.uint8).reshape(self.M, -1)
        weights = np.asarray(self.soft_weights, dtype=float).reshape(-1)
        object.__setattr__(self, "hard_lits", hard)
        object.__setattr__(self, "soft_lits", soft)
        object.__setattr__(self, "soft_weights", weights)
        object.__setattr__(self, "mode", Mode(self.mode))
        if not 0 <= self.L <= self.U <= self.M:
            raise ValueError(f"budget must satisfy 0 <= L <= U <= M, got L={self.L}, U={self.U}, M={self.M}")
        if soft.shape[1] != weights.shape[0]:
            raise ValueError("soft matrix width does not match weight count")
        if np.any(weights < 0) or self.penalty < 0:
            raise ValueError("weights and lambda must be non-negative")
        if hard.size and hard.max() > 1 or soft.size and soft.max() > 1:
            raise ValueError("literals must be 0/1")

    def utilities(self) -> np.ndarray:
        return self.soft_lits @ self.soft_weights - self.penalty

    def hard_feasible(self) -> np.ndarray:
        return np.all(self.hard_lits == 1, axis=1)

    def __eq__(self, other):
        if not isinstance(other, MaxSmtInstance):
            return NotImplemented
        return (
            (self.M, self.L, self.U, self.penalty, self.mode) == (other.M, other.L, other.U, other.penalty, other.mode)
            and np.array_equal(self.hard_lits, other.hard_lits)
            and np.array_equal(self.soft_lits, other.soft_lits)
            and np.array_equal(self.soft_weights, other.soft_weights)
        )


@dataclass(frozen=True, eq=False)
class Selection:
    chosen: np.ndarray  # (M,) uint8
    objective: float
    feasible: bool
    per_endpoint_utility: np.ndarray

    @property
    def indices(self) -> list[int]:
        """0-based indices of chosen endpoints."""
        return [int(i) for i in np.flatnonzero(self.chosen)]

    @property
    def size(self) -> int:
        return int(self.chosen.sum())


def build_instance(cs: ConstraintSet, zoo: Zoo, current: Endpoint | None) -> MaxSmtInstance:
    hard = np.array(
        [[eval_predicate(p, e, current, zoo) for p in cs.hard] for e in zoo.endpoints], dtype=np.uint8
    ).reshape(zoo.M, len(cs.hard))
    soft = np.array(
        [[eval_predicate(p, e, current, zoo) for p, _ in cs.soft] for e in zoo.endpoints], dtype=np.uint8
    ).reshape(zoo.M, len(cs.soft))
    weights = np.array([w for _, w in cs.soft], dtype=float)
    return MaxSmtInstance(zoo.M, hard, soft, weights, cs.budget_low, cs.budget_high, cs.penalty, cs.mode)


def _selection(inst: MaxSmtInstance, chosen: np.ndarray, u: np.ndarray) -> Selection:
    chosen = chosen.astype(np.uint8)
    return Selection(chosen, float(chosen @ u), True, u)


def solve(inst: MaxSmtInstance) -> Selection:
    u = inst.utilities()
    feasible = inst.hard_feasible()

    if inst.mode is Mode.COMPLETENESS:
        return _selection(inst, feasible, u)

    candidates = np.flatnonzero(feasible)
    if len(candidates) < inst.L:
        return Selection(np.zeros(inst.M, dtype=np.uint8), float("-inf"), False, u)

    # stable sort on -u keeps lowest index first among equal utilities
    order = candidates[np.argsort(-u[candidates], kind="stable")]
    n_positive = int(np.sum(u[order] > 0))
    count = min(max(n_positive, inst.L), inst.U)
    chosen = np.zeros(inst.M, dtype=bool)
    chosen[order[:count]] = True
    return _selection(inst, chosen, u)


@functools.lru_cache(maxsize=None)
def _all_subsets(M: int) -> np.ndarray:
    subsets = np.array(list(itertools.product((0, 1), repeat=M)), dtype=np.uint8).reshape(-1, M)
    subsets.setflags(write=False)
    return subsets


def solve_oracle(inst: MaxSmtInstance) -> Selection:
    """Exhaustive 2^M search; ties go to the lexicographically smallest index tuple."""
    if inst.M > ORACLE_MAX_M:
        raise SizeGuardError(f"oracle limited to M <= {ORACLE_MAX_M}, got {inst.M}")
    u = inst.utilities()
    feasible = inst.hard_feasible()
    M = inst.M

    subsets = _all_subsets(M)
    sizes = subsets.sum(axis=1)
    if inst.mode is Mode.COMPLETENESS:
        ok = np.all(subsets == feasible.astype(np.uint8), axis=1)
    else:
        ok = np.all(subsets <= feasible, axis=1) & (sizes >= inst.L) & (sizes <= inst.U)
    if not ok.any():
        return Selection(np.zeros(M, dtype=np.uint8), float("-inf"), False, u)

    values = subsets[ok].astype(float) @ u
    best = values.max()
    tied = subsets[ok][values >= best - 1e-12]
    winner = min(tied, key=lambda row: tuple(np.flatnonzero(row)))
    return _selection(inst, winner, u)


def dump_instance(inst: MaxSmtInstance) -> str:
    """Plain-text instance dump, one section per matrix."""
    lines = [
        "maxsmt-instance 1",
        f"M {inst.M}",
        f"mode {inst.mode.value}",
        f"budget {inst.L} {inst.U}",
        f"lambda {inst.penalty!r}",
        "weights " + " ".join(repr(float(w)) for w in inst.soft_weights),
        f"hard {inst.hard_lits.shape[1]}",
    ]
    lines += [" ".join(str(int(b)) for b in row) for row in inst.hard_lits]
    lines.append(f"soft {inst.soft_lits.shape[1]}")
    lines += [" ".join(str(int(b)) for b in row) for row in inst.soft_lits]
    return "\n".join(lines) + "\n"


def parse_instance(text: str) -> MaxSmtInstance:
    lines = text.splitlines()
    it = iter(lines)

    def field_(name: str) -> list[str]:
        parts = next(it).split()
        if not parts or parts[0] != name:
            raise ValueError(f"expected {name!r} line, got {parts!r}")
        return parts[1:]

    if field_("maxsmt-instance") != ["1"]:
        raise ValueError("unsupported instance dump version")
    M = int(field_("M")[0])
    mode = Mode(field_("mode")[0])
    L, U = (int(x) for x in field_("budget"))
    penalty = float(field_("lambda")[0])
    weights = [float(x) for x in field_("weights")]

    def matrix(name: str) -> np.ndarray:
        width = int(field_(name)[0])
        rows = [[int(b) for b in next(it).split()] for _ in range(M)]
        return np.array(rows, dtype=np.uint8).reshape(M, width)

    hard = matrix("hard")
    soft = matrix("soft")
    return MaxSmtInstance(M, hard, soft, np.array(weights), L, U, penalty, mode)
