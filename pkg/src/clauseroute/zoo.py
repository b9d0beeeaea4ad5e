"""Endpoint pool ("model zoo") loading, validation and quantile queries."""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, TextIO

MISSING_CELL = "-"

# Column name -> kind. Order is the on-disk column order.
ID_COLUMN = "id"
NAME_COLUMNS = ("model-id", "model")

SCHEMA: tuple[tuple[str, str], ...] = (
    ("Intelligence", "score"),
    ("Speed", "score"),
    ("Text In", "flag"),
    ("Image In", "flag"),
    ("Voice In", "flag"),
    ("Video In", "flag"),
    ("Text Out", "flag"),
    ("Image Out", "flag"),
    ("Audio Out", "flag"),
    ("Video Out", "flag"),
    ("Reasoning", "flag"),
    ("Input Price", "price"),
    ("Cached Price", "price"),
    ("Output Price", "price"),
    ("Context Window", "tokens"),
    ("Max Output", "tokens"),
    ("Know. Cutoff", "date"),
    ("Comp. Endpt", "flag"),
    ("Resp. Endpt", "flag"),
    ("Assist. Endpt", "flag"),
    ("Batch Endpt", "flag"),
    ("Fine-Tune Endpt", "flag"),
    ("Streaming", "flag"),
    ("Func. Calling", "flag"),
    ("Struct. Output", "flag"),
    ("Fine-Tuning", "flag"),
    ("Distillation", "flag"),
    ("Pred. Outputs", "flag"),
    ("Rate Lim (Free)", "rate"),
    ("Rate Lim (T1)", "rate"),
    ("Rate Lim (T2)", "rate"),
    ("Rate Lim (T3)", "rate"),
    ("Rate Lim (T4)", "rate"),
    ("Rate Lim (T5)", "rate"),
)

HEADER: tuple[str, ...] = (ID_COLUMN, *NAME_COLUMNS, *(name for name, _ in SCHEMA))
NUMERIC_KINDS = frozenset({"score", "flag", "price", "tokens", "rate"})
CACHED_QUANTILES = (0.25, 0.5, 0.75)

_TOKEN_RE = re.compile(r"^(\d+)([kM]?)$")
_MONTHS = {m: i for i, m in enumerate(
    ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"], start=1)}

Value = int | float | dt.date | None


class ZooError(ValueError):
    """Base class for zoo ingestion and query errors."""


class ZooSchemaError(ZooError):
    def __init__(self, column: str, message: str):
        self.column = column
        super().__init__(f"schema error at column {column!r}: {message}")


class ZooParseError(ZooError):
    def __init__(self, row: int, column: str, cell: str, message: str = "cannot parse cell"):
        self.row = row
        self.column = column
        self.cell = cell
        super().__init__(f"row {row}, column {column!r}: {message} ({cell!r})")


class DegenerateZooError(ZooError):
    pass


class AttributeKindError(ZooError):
    pass


class InsufficientDataError(ZooError):
    pass


def parse_token_count(cell: str) -> int:
    """Expand ``16k`` / ``1M`` style counts (k = 1 000, M = 1 000 000)."""
    match = _TOKEN_RE.match(cell)
    if match is None:
        raise ValueError(cell)
    number, suffix = match.groups()
    return int(number) * {"": 1, "k": 1_000, "M": 1_000_000}[suffix]


def _parse_date(cell: str) -> dt.date:
    # "23-Oct" -> 2023-10-01
    year, month = cell.split("-")
    return dt.date(2000 + int(year), _MONTHS[month], 1)


def _parse_cell(kind: str, cell: str) -> Value:
    if cell == MISSING_CELL:
        return None
    if kind == "score":
        return int(cell)
    if kind == "flag":
        value = int(cell)
        if value not in (0, 1):
            raise ValueError(cell)
        return value
    if kind == "price":
        value = float(cell)
        if not math.isfinite(value) or value < 0:
            raise ValueError(cell)
        return value
    if kind in ("tokens", "rate"):
        return parse_token_count(cell)
    if kind == "date":
        return _parse_date(cell)
    raise AssertionError(kind)


@dataclass(frozen=True)
class Endpoint:
    id: int
    model_id: str
    name: str
    attributes: Mapping[str, Value]
    raw: Mapping[str, str] = field(repr=False, compare=False)

    def __getitem__(self, attr: str) -> Value:
        return self.attributes[attr]

    def agent_row(self) -> list[str]:
        """Source cells minus the name columns."""
        return [str(self.id), *(self.raw[name] for name, _ in SCHEMA)]


@dataclass(frozen=True)
class Zoo:
    endpoints: tuple[Endpoint, ...]
    quantile_cache: Mapping[str, Mapping[float, Value]] = field(compare=False)

    @property
    def M(self) -> int:
        return len(self.endpoints)

    @property
    def schema(self) -> tuple[tuple[str, str], ...]:
        return SCHEMA

    @property
    def attribute_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in SCHEMA)

    def kind(self, attr: str) -> str:
        try:
            return _KINDS[attr]
        except KeyError:
            raise AttributeKindError(f"unknown attribute {attr!r}") from None

    def endpoint(self, endpoint_id: int) -> Endpoint:
        if not 1 <= endpoint_id <= self.M:
            raise KeyError(f"no endpoint with id {endpoint_id}")
        return self.endpoints[endpoint_id - 1]

    def column(self, attr: str) -> list[Value]:
        self.kind(attr)
        return [e.attributes[attr] for e in self.endpoints]

    def find(self, name: str) -> Endpoint:
        """Look an endpoint up by display name or model id (case-insensitive)."""
        key = name.strip().lower()
        for e in self.endpoints:
            if key in (e.name.lower(), e.model_id.lower()):
                return e
        raise KeyError(f"no endpoint named {name!r}")

    def quantile(self, attr: str, q: float) -> Value:
        cached = self.quantile_cache.get(attr, {})
        if q in cached:
            return cached[q]
        return attribute_quantile(self, attr, q)


_KINDS = dict(SCHEMA)


def nearest_rank(values: Iterable[float], q: float) -> float:
    """q-quantile as the ceil(q*n)-th order statistic (first one for q = 0)."""
    ordered = sorted(values)
    if not ordered:
        raise InsufficientDataError("no values")
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"quantile fraction out of range: {q}")
    rank = max(1, math.ceil(q * len(ordered) - 1e-12))
    return ordered[rank - 1]


def attribute_quantile(zoo: Zoo, attr: str, q: float) -> Value:
    kind = zoo.kind(attr)
    if kind not in NUMERIC_KINDS:
        raise AttributeKindError(f"attribute {attr!r} has non-numeric kind {kind!r}")
    present = [v for v in zoo.column(attr) if v is not None]
    if not present:
        raise InsufficientDataError(f"attribute {attr!r} has no non-missing values")
    return nearest_rank(present, q)


def _build_quantile_cache(endpoints: tuple[Endpoint, ...]) -> dict[str, dict[float, Value]]:
    cache: dict[str, dict[float, Value]] = {}
    for name, kind in SCHEMA:
        if kind not in NUMERIC_KINDS:
            continue
        present = [e.attributes[name] for e in endpoints if e.attributes[name] is not None]
        if present:
            cache[name] = {q: nearest_rank(present, q) for q in CACHED_QUANTILES}
    return cache


def _check_endpoint(row_no: int, attrs: dict[str, Value], raw: dict[str, str]) -> None:
    for attr in ("Intelligence", "Speed"):
        v = attrs[attr]
        if v is not None and not 1 <= v <= 5:
            raise ZooParseError(row_no, attr, raw[attr], "score outside 1..5")
    ctx, max_out = attrs["Context Window"], attrs["Max Output"]
    if max_out is not None and max_out <= 0:
        raise ZooParseError(row_no, "Max Output", raw["Max Output"], "must be positive")
    if ctx is not None and max_out is not None and ctx < max_out:
        raise ZooParseError(row_no, "Context Window", raw["Context Window"], "smaller than Max Output")


def load_zoo(source: TextIO | str | Path) -> Zoo:
    """Parse a zoo CSV stream (or path) into a validated :class:`Zoo`."""
    if isinstance(source, (str, Path)):
        with open(source, encoding="utf-8", newline="") as fh:
            return load_zoo(fh)

    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise DegenerateZooError("empty zoo file (no header)") from None
    header = [h.strip() for h in header]
    for i, expected in enumerate(HEADER):
        if i >= len(header):
            raise ZooSchemaError(expected, "column missing from header")
        if header[i] != expected:
            raise ZooSchemaError(header[i], f"expected {expected!r} at position {i + 1}")
    if len(header) > len(HEADER):
        raise ZooSchemaError(header[len(HEADER)], "unexpected extra column")

    endpoints: list[Endpoint] = []
    for row_no, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(HEADER):
            raise ZooParseError(row_no, "*", ",".join(row), f"expected {len(HEADER)} cells, got {len(row)}")
        cells = dict(zip(HEADER, (c.strip() for c in row)))
        try:
            endpoint_id = int(cells[ID_COLUMN])
        except ValueError:
            raise ZooParseError(row_no, ID_COLUMN, cells[ID_COLUMN]) from None
        if endpoint_id != row_no:
            raise ZooParseError(row_no, ID_COLUMN, cells[ID_COLUMN], f"ids must run 1..M, expected {row_no}")
        attrs: dict[str, Value] = {}
        for name, kind in SCHEMA:
            try:
                attrs[name] = _parse_cell(kind, cells[name])
            except (ValueError, KeyError):
                raise ZooParseError(row_no, name, cells[name]) from None
        raw = {name: cells[name] for name, _ in SCHEMA}
        _check_endpoint(row_no, attrs, raw)
        endpoints.append(Endpoint(endpoint_id, cells["model-id"], cells["model"], attrs, raw))

    if len(endpoints) < 2:
        raise DegenerateZooError(f"zoo needs at least 2 endpoints, got {len(endpoints)}")
    frozen = tuple(endpoints)
    return Zoo(frozen, _build_quantile_cache(frozen))


def bundled_zoo_path() -> Path:
    return Path(str(resources.files("clauseroute") / "data" / "model_zoo.csv"))


def load_bundled_zoo() -> Zoo:
    return load_zoo(bundled_zoo_path())


def _write_csv(header: Iterable[str], rows: Iterable[Iterable[str]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def agent_header() -> list[str]:
    return [ID_COLUMN, *(name for name, _ in SCHEMA)]


def render_for_agent(zoo: Zoo) -> str:
    """The zoo as CSV with the ``model`` and ``model-id`` columns removed."""
    return _write_csv(agent_header(), (e.agent_row() for e in zoo.endpoints))


def render_endpoint_row(endpoint: Endpoint) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="").writerow(endpoint.agent_row())
    return buf.getvalue()


def render_full(zoo: Zoo) -> str:
    return _write_csv(HEADER, ([str(e.id), e.model_id, e.name, *e.agent_row()[1:]] for e in zoo.endpoints))
