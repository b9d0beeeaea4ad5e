"""Run-by-endpoint inclusion matrices and planted-model simulation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from ..postcond import Label, label_for


class ConditioningError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class RunMatrix:
    run_ids: tuple[str, ...]
    bits: np.ndarray  # (n_runs, M) uint8
    labels: frozenset[str] = frozenset({Label.CASE_S.value})

    def __post_init__(self):
        bits = np.asarray(self.bits, dtype=np.uint8)
        if bits.ndim != 2 or bits.shape[0] != len(self.run_ids):
            raise ValueError("bits must be (n_runs, M) and match run_ids")
        object.__setattr__(self, "bits", bits)

    @property
    def n_runs(self) -> int:
        return self.bits.shape[0]

    @property
    def M(self) -> int:
        return self.bits.shape[1]

    def counts(self, rows: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Per-endpoint selection counts and run totals (optionally for a row subset)."""
        bits = self.bits if rows is None else self.bits[rows]
        return bits.sum(axis=0).astype(float), np.full(bits.shape[1], float(bits.shape[0]))

    def selection_rates(self) -> np.ndarray:
        return self.bits.mean(axis=0)

    def set_sizes(self) -> np.ndarray:
        return self.bits.sum(axis=1)

    def permuted(self, rng: np.random.Generator) -> "RunMatrix":
        """Shuffle endpoint identities independently within every run."""
        shuffled = rng.permuted(self.bits, axis=1)
        if not np.array_equal(shuffled.sum(axis=1), self.set_sizes()):
            raise AssertionError("within-run permutation changed a set size")
        return RunMatrix(self.run_ids, shuffled, self.labels)

    @classmethod
    def from_masks(
        cls,
        run_ids: Sequence[str],
        masks: Iterable[np.ndarray],
        labels: Iterable[Label | str] = (Label.CASE_S,),
    ) -> "RunMatrix":
        """Keep only masks whose postcondition label is admitted (Case S by default)."""
        admitted = frozenset(Label(x).value for x in labels)
        ids, rows = [], []
        for run_id, bits in zip(run_ids, masks):
            bits = np.asarray(bits, dtype=np.uint8)
            if label_for(bits).value in admitted:
                ids.append(run_id)
                rows.append(bits)
        if not rows:
            raise ConditioningError(f"no runs with labels {sorted(admitted)}")
        return cls(tuple(ids), np.vstack(rows), admitted)


def sigmoid(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def simulate_runs(
    features: np.ndarray,
    weights: np.ndarray,
    intercept: float,
    n_runs: int,
    rng: np.random.Generator,
    case_s_only: bool = True,
    max_draws: int = 1_000_000,
) -> np.ndarray:
    """Draw inclusion masks x_m ~ Bernoulli(sigmoid(b + psi_m . w)).

    With ``case_s_only`` draws that are empty, singletons or the full pool are
    rejected until ``n_runs`` Case S masks are collected.
    """
    p = sigmoid(intercept + np.asarray(features, float) @ np.asarray(weights, float))
    out = []
    draws = 0
    while len(out) < n_runs:
        draws += 1
        if draws > max_draws:
            raise RuntimeError("planted model rarely yields Case S runs; check parameters")
        bits = (rng.random(p.shape[0]) < p).astype(np.uint8)
        if case_s_only and label_for(bits) is not Label.CASE_S:
            continue
        out.append(bits)
    return np.vstack(out) if out else np.zeros((0, p.shape[0]), dtype=np.uint8)


def random_case_s_runs(M: int, n_runs: int, rng: np.random.Generator) -> np.ndarray:
    """Structure-free Case S masks: uniform size in 2..M-1, then a uniform subset."""
    out = np.zeros((n_runs, M), dtype=np.uint8)
    for r in range(n_runs):
        size = int(rng.integers(2, M))
        out[r, rng.choice(M, size=size, replace=False)] = 1
    return out
