"""Output-mask normalization, postcondition labels and coverage/precision."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .dirkey import DirectionKey


class Label(str, enum.Enum):
    ZERO = "ZERO"
    ONE = "ONE"
    CASE_S = "CASE_S"
    ALL = "ALL"


LABEL_ORDER = (Label.ZERO, Label.ONE, Label.CASE_S, Label.ALL)


class UndefinedCoverageError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class OutputMask:
    bits: np.ndarray
    fail_flag: bool
    source_token_count: int

    @property
    def M(self) -> int:
        return len(self.bits)

    @property
    def size(self) -> int:
        return int(self.bits.sum())

    def text(self) -> str:
        return " ".join(str(int(b)) for b in self.bits)

    def __eq__(self, other):
        if not isinstance(other, OutputMask):
            return NotImplemented
        return (
            np.array_equal(self.bits, other.bits)
            and self.fail_flag == other.fail_flag
            and self.source_token_count == other.source_token_count
        )


@dataclass(frozen=True)
class Postcondition:
    label: Label
    fail_flag: bool = False


def process_mask(raw: str, M: int) -> OutputMask:
    """Keep whitespace tokens equal to "0"/"1", pad with zeros or truncate to M.

    ``source_token_count`` is the number of binary tokens found before padding
    or truncation. Any other token, or a count different from M, sets
    ``fail_flag``.
    """
    if M < 1:
        raise ValueError("M must be at least 1")
    tokens = raw.split()
    binary = [int(t) for t in tokens if t in ("0", "1")]
    fail = len(binary) != M or len(binary) != len(tokens)
    bits = np.zeros(M, dtype=np.uint8)
    kept = binary[:M]
    bits[: len(kept)] = kept
    return OutputMask(bits, fail, len(binary))


def label_for(bits: np.ndarray) -> Label:
    M = len(bits)
    n = int(np.sum(bits))
    if n == 0:
        return Label.ZERO
    if n == M:
        return Label.ALL
    if n == 1:
        return Label.ONE
    return Label.CASE_S


def classify(mask: OutputMask) -> Postcondition:
    return Postcondition(label_for(mask.bits), mask.fail_flag)


def coverage_precision(mask: OutputMask | np.ndarray, target: Sequence[int] | np.ndarray) -> tuple[float, float | None]:
    """Coverage |C & T| / |T| and precision |C & T| / |C|.

    Precision of an empty output set is ``None``.
    """
    bits = mask.bits if isinstance(mask, OutputMask) else np.asarray(mask)
    target = np.asarray(target, dtype=bool)
    if target.shape != bits.shape:
        raise ValueError(f"target length {target.size} != mask length {bits.size}")
    chosen = bits.astype(bool)
    n_target = int(target.sum())
    if n_target == 0:
        raise UndefinedCoverageError("coverage is undefined for an empty target set")
    hit = int(np.sum(chosen & target))
    n_chosen = int(chosen.sum())
    precision = hit / n_chosen if n_chosen else None
    return hit / n_target, precision


@dataclass(frozen=True)
class OutcomeRow:
    key: str
    counts: dict[Label, int]
    fail: int

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def percent(self, label: Label) -> float:
        return 100.0 * self.counts[label] / self.total if self.total else 0.0

    def cell(self, label: Label) -> str:
        """Count with percentage, e.g. ``101 (51.01%)``; bare ``0`` when empty."""
        n = self.counts[label]
        if n == 0:
            return "0"
        pct = f"{self.percent(label):.2f}".rstrip("0").rstrip(".")
        return f"{n} ({pct}%)"


def tally_outcomes(runs: Iterable[tuple[DirectionKey | str, Postcondition]]) -> list[OutcomeRow]:
    counts: dict[str, dict[Label, int]] = {}
    fails: dict[str, int] = {}
    for key, post in runs:
        raw = key.raw if isinstance(key, DirectionKey) else key
        row = counts.setdefault(raw, {label: 0 for label in LABEL_ORDER})
        row[post.label] += 1
        fails[raw] = fails.get(raw, 0) + int(post.fail_flag)
    return [OutcomeRow(k, counts[k], fails[k]) for k in sorted(counts)]


def format_outcome_table(rows: Sequence[OutcomeRow]) -> str:
    header = ["Direction Key", "Zero (%)", "One (%)", "Case S (%)", "All (%)", "Count"]
    body = [[r.key or "<empty>", *(r.cell(label) for label in LABEL_ORDER), str(r.total)] for r in rows]
    widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]
    lines = [" | ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() for row in [header, *body]]
    lines.insert(1, "-+-".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
