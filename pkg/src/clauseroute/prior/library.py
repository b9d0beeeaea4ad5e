"""Boolean metadata predicates used to explain no-feedback selections."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..zoo import Zoo, ZooError, nearest_rank

PREDICATE_NAMES: tuple[str, ...] = (
    "cached_input_available",
    "reasoning_enabled",
    "cached_and_reasoning",
    "int_ge_4",
    "int_is_max",
    "speed_gt_3",
    "speed_ge_4",
    "cheap_output_global_q0.25",
    "cheap_input_global_q0.25",
    "cheap_output_in_int_tier_q0.25",
    "ctx_ge_median",
    "ctx_ge_p75",
    "maxout_ge_median",
    "maxout_ge_p75",
    "cheap_cached_price_global_q0.25",
    "int_ge_4_and_cached",
    "cached_and_cheap_output_in_tier",
    "int_ge_4_and_cheap_output_in_tier",
    "ctx_p75_and_cached",
)


class LibraryBuildError(ValueError):
    def __init__(self, predicate: str, reason: str):
        self.predicate = predicate
        super().__init__(f"cannot build predicate {predicate!r}: {reason}")


def _column(zoo: Zoo, attr: str) -> np.ndarray:
    """Attribute column as floats with NaN for missing values."""
    return np.array([np.nan if v is None else float(v) for v in zoo.column(attr)])


def _cmp(values: np.ndarray, relation: str, threshold: float) -> np.ndarray:
    # NaN compares False, so missing values never satisfy a predicate
    with np.errstate(invalid="ignore"):
        if relation == "<=":
            return values <= threshold
        if relation == ">=":
            return values >= threshold
        if relation == ">":
            return values > threshold
        if relation == "==":
            return values == threshold
    raise AssertionError(relation)


def _in_tier_cheap(zoo: Zoo, attr: str, q: float) -> np.ndarray:
    price = _column(zoo, attr)
    tier = _column(zoo, "Intelligence")
    out = np.zeros(zoo.M, dtype=bool)
    for level in np.unique(tier[~np.isnan(tier)]):
        members = tier == level
        present = price[members & ~np.isnan(price)]
        if present.size:
            out |= members & _cmp(price, "<=", nearest_rank(present, q))
    return out


def _base_predicates(zoo: Zoo) -> dict[str, Callable[[], np.ndarray]]:
    def quant(attr: str, q: float) -> float:
        return float(zoo.quantile(attr, q))

    return {
        "cached_input_available": lambda: ~np.isnan(_column(zoo, "Cached Price")),
        "reasoning_enabled": lambda: _cmp(_column(zoo, "Reasoning"), "==", 1),
        "int_ge_4": lambda: _cmp(_column(zoo, "Intelligence"), ">=", 4),
        "int_is_max": lambda: _cmp(_column(zoo, "Intelligence"), "==", quant("Intelligence", 1.0)),
        "speed_gt_3": lambda: _cmp(_column(zoo, "Speed"), ">", 3),
        "speed_ge_4": lambda: _cmp(_column(zoo, "Speed"), ">=", 4),
        "cheap_output_global_q0.25": lambda: _cmp(_column(zoo, "Output Price"), "<=", quant("Output Price", 0.25)),
        "cheap_input_global_q0.25": lambda: _cmp(_column(zoo, "Input Price"), "<=", quant("Input Price", 0.25)),
        "cheap_output_in_int_tier_q0.25": lambda: _in_tier_cheap(zoo, "Output Price", 0.25),
        "ctx_ge_median": lambda: _cmp(_column(zoo, "Context Window"), ">=", quant("Context Window", 0.5)),
        "ctx_ge_p75": lambda: _cmp(_column(zoo, "Context Window"), ">=", quant("Context Window", 0.75)),
        "maxout_ge_median": lambda: _cmp(_column(zoo, "Max Output"), ">=", quant("Max Output", 0.5)),
        "maxout_ge_p75": lambda: _cmp(_column(zoo, "Max Output"), ">=", quant("Max Output", 0.75)),
        "cheap_cached_price_global_q0.25": lambda: _cmp(
            _column(zoo, "Cached Price"), "<=", quant("Cached Price", 0.25)
        ),
    }


_CONJUNCTIONS = {
    "cached_and_reasoning": ("cached_input_available", "reasoning_enabled"),
    "int_ge_4_and_cached": ("int_ge_4", "cached_input_available"),
    "cached_and_cheap_output_in_tier": ("cached_input_available", "cheap_output_in_int_tier_q0.25"),
    "int_ge_4_and_cheap_output_in_tier": ("int_ge_4", "cheap_output_in_int_tier_q0.25"),
    "ctx_p75_and_cached": ("ctx_ge_p75", "cached_input_available"),
}


@dataclass(frozen=True, eq=False)
class PredicateLibrary:
    names: tuple[str, ...]
    matrix: np.ndarray  # (M, J) uint8, matrix[m, j] = psi_j(endpoint m)

    @property
    def J(self) -> int:
        return len(self.names)

    @property
    def M(self) -> int:
        return self.matrix.shape[0]

    def index(self, name: str) -> int:
        return self.names.index(name)

    def column(self, name: str) -> np.ndarray:
        return self.matrix[:, self.index(name)]

    def weight_vector(self, weights: dict[str, float]) -> np.ndarray:
        unknown = set(weights) - set(self.names)
        if unknown:
            raise KeyError(f"unknown predicates: {sorted(unknown)}")
        return np.array([float(weights.get(n, 0.0)) for n in self.names])


def build_library(zoo: Zoo) -> PredicateLibrary:
    base = _base_predicates(zoo)
    columns: dict[str, np.ndarray] = {}
    for name, make in base.items():
        try:
            columns[name] = np.asarray(make(), dtype=bool)
        except (ZooError, KeyError) as exc:
            raise LibraryBuildError(name, str(exc)) from exc
    for name, (left, right) in _CONJUNCTIONS.items():
        columns[name] = columns[left] & columns[right]
    matrix = np.column_stack([columns[n] for n in PREDICATE_NAMES]).astype(np.uint8)
    matrix.setflags(write=False)
    return PredicateLibrary(PREDICATE_NAMES, matrix)
