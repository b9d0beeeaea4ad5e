"""Direction-key classification and compilation into weighted constraint sets.

A direction key is a short feedback string such as ``"I want a cheaper model."``.
It is classified as no-feedback (NF), a precise attribute description (LF_PD)
or a general direction (LF_GD), then compiled into hard and soft predicates
over endpoint attributes relative to the current endpoint.
"""

from __future__ import annotations

import enum
import json
import operator
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

from .zoo import Endpoint, Zoo


class KeyKind(str, enum.Enum):
    NF = "NF"
    LF_PD = "LF_PD"
    LF_GD = "LF_GD"
    UNRECOGNIZED = "UNRECOGNIZED"


class Mode(str, enum.Enum):
    SHORTLIST = "SHORTLIST"
    COMPLETENESS = "COMPLETENESS"


class CompileError(ValueError):
    def __init__(self, raw: str, message: str = "unrecognized direction key"):
        self.raw = raw
        super().__init__(f"{message}: {raw!r}")


class UnknownAttributeError(CompileError):
    def __init__(self, raw: str, phrase: str):
        self.phrase = phrase
        super().__init__(raw, f"unknown attribute phrase {phrase!r} in key")


RELATIONS = {
    "<": operator.lt,
    "<=": operator.le,
    "=": operator.eq,
    ">=": operator.ge,
    ">": operator.gt,
}


@dataclass(frozen=True)
class CompilerConfig:
    nf_tokens: frozenset[str]
    directions: Mapping[str, Mapping[str, str]]
    filler_words: frozenset[str]
    attribute_phrases: Mapping[str, str]
    gd_weights: Mapping[str, tuple[tuple[str, float], ...]]
    gd_target: Mapping[str, str]
    penalty: float
    budget_low: int
    budget_high: int | None

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CompilerConfig":
        shortlist = data.get("shortlist", {})
        return cls(
            nf_tokens=frozenset(_normalize(t) for t in data["nf_tokens"]),
            directions={_normalize(k): dict(v) for k, v in data["directions"].items()},
            filler_words=frozenset(data.get("filler_words", ())),
            attribute_phrases={_normalize(k): v for k, v in data["attribute_phrases"].items()},
            gd_weights={fam: tuple((a, float(w)) for a, w in pairs) for fam, pairs in data["gd_weights"].items()},
            gd_target=dict(data.get("gd_target", {})),
            penalty=float(shortlist.get("lambda", 0.25)),
            budget_low=int(shortlist.get("budget_low", 1)),
            budget_high=shortlist.get("budget_high"),
        )

    @classmethod
    def load(cls, path: str | Path | None = None) -> "CompilerConfig":
        if path is None:
            text = (resources.files("clauseroute") / "data" / "compiler.json").read_text(encoding="utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        return cls.from_dict(json.loads(text))

    def accepted_forms(self) -> list[str]:
        words = sorted(self.directions)
        phrases = sorted(self.attribute_phrases)
        return [
            "no feedback: " + ", ".join(repr(t) for t in sorted(self.nf_tokens)),
            "general direction: 'I want a <direction> model.' with <direction> in " + ", ".join(words),
            "precise: 'I want a model with <direction> <attribute>' with <attribute> in " + ", ".join(phrases),
        ]


_DEFAULT_CONFIG: CompilerConfig | None = None


def default_config() -> CompilerConfig:
    global _DEFAULT_CONFIG
    if _DEFAULT_CONFIG is None:
        _DEFAULT_CONFIG = CompilerConfig.load()
    return _DEFAULT_CONFIG


def _normalize(raw: str) -> str:
    text = " ".join(raw.lower().split())
    return text.rstrip(".!?;:, ").strip()


@dataclass(frozen=True)
class DirectionKey:
    raw: str
    kind: KeyKind
    direction: str | None = None
    phrase: str | None = None

    @property
    def is_nf(self) -> bool:
        return self.kind is KeyKind.NF


def classify(raw: str, config: CompilerConfig | None = None) -> DirectionKey:
    config = config or default_config()
    text = _normalize(raw)
    if text in config.nf_tokens:
        return DirectionKey(raw, KeyKind.NF)

    # longest direction words first so "more expensive" beats "expensive"-like overlaps
    words = sorted(config.directions, key=len, reverse=True)
    pattern = re.compile(r"\b(" + "|".join(re.escape(w) for w in words) + r")\b")
    match = pattern.search(text)
    if match is None:
        return DirectionKey(raw, KeyKind.UNRECOGNIZED)

    direction = match.group(1)
    rest = [w for w in text[match.end():].split() if w not in config.filler_words]
    if not rest:
        return DirectionKey(raw, KeyKind.LF_GD, direction=direction)
    return DirectionKey(raw, KeyKind.LF_PD, direction=direction, phrase=" ".join(rest))


@dataclass(frozen=True)
class Comparison:
    """``candidate[attribute] <relation> reference``.

    ``reference`` is ``"current"`` (the current endpoint's value), ``"quantile"``
    (zoo quantile at ``value``) or ``"constant"`` (``value`` itself).
    """

    attribute: str
    relation: str
    reference: str = "current"
    value: Any = None

    def __post_init__(self):
        if self.relation not in RELATIONS:
            raise ValueError(f"unknown relation {self.relation!r}")
        if self.reference not in ("current", "quantile", "constant"):
            raise ValueError(f"unknown reference {self.reference!r}")


@dataclass(frozen=True)
class Predicate:
    name: str
    comparisons: tuple[Comparison, ...]

    @property
    def binary(self) -> bool:
        return any(c.reference == "current" for c in self.comparisons)

    @property
    def attributes(self) -> tuple[str, ...]:
        return tuple(c.attribute for c in self.comparisons)


def eval_predicate(p: Predicate, candidate: Endpoint, current: Endpoint | None, zoo: Zoo) -> int:
    """1 iff every comparison holds; a missing value on either side fails it."""
    for comp in p.comparisons:
        lhs = candidate.attributes.get(comp.attribute)
        if comp.reference == "current":
            rhs = None if current is None else current.attributes.get(comp.attribute)
        elif comp.reference == "quantile":
            try:
                rhs = zoo.quantile(comp.attribute, comp.value)
            except ValueError:
                rhs = None
        else:
            rhs = comp.value
        if lhs is None or rhs is None or not RELATIONS[comp.relation](lhs, rhs):
            return 0
    return 1


def relative_predicate(attribute: str, relation: str) -> Predicate:
    return Predicate(f"{attribute} {relation} current", (Comparison(attribute, relation),))


@dataclass(frozen=True)
class ConstraintSet:
    hard: tuple[Predicate, ...]
    soft: tuple[tuple[Predicate, float], ...]
    budget_low: int
    budget_high: int
    penalty: float
    mode: Mode
    key: DirectionKey | None = field(default=None, compare=False)

    @property
    def vacuous(self) -> bool:
        return not self.hard and not self.soft

    def describe(self) -> str:
        lines = [f"mode={self.mode.value} budget=[{self.budget_low}, {self.budget_high}] lambda={self.penalty:g}"]
        if self.vacuous:
            lines.append("vacuous constraint set (no hard or soft clauses)")
        for p in self.hard:
            lines.append(f"hard: {p.name}")
        for p, w in self.soft:
            lines.append(f"soft: {p.name} : w={w:g}")
        return "\n".join(lines)


def _resolve_phrase(key: DirectionKey, zoo: Zoo, config: CompilerConfig) -> str:
    attr = config.attribute_phrases.get(key.phrase or "")
    if attr is None or attr not in zoo.attribute_names:
        raise UnknownAttributeError(key.raw, key.phrase or "")
    return attr


def compile_key(
    key: DirectionKey,
    zoo: Zoo,
    mode: Mode = Mode.SHORTLIST,
    config: CompilerConfig | None = None,
) -> ConstraintSet:
    config = config or default_config()
    mode = Mode(mode)
    if key.kind is KeyKind.UNRECOGNIZED:
        raise CompileError(key.raw)

    hard: list[Predicate] = []
    soft: list[tuple[Predicate, float]] = []
    if key.kind is KeyKind.LF_PD:
        relation = config.directions[key.direction]["relation"]
        hard.append(relative_predicate(_resolve_phrase(key, zoo, config), relation))
    elif key.kind is KeyKind.LF_GD:
        entry = config.directions[key.direction]
        for attr, weight in config.gd_weights[entry["family"]]:
            if attr not in zoo.attribute_names:
                raise UnknownAttributeError(key.raw, attr)
            soft.append((relative_predicate(attr, entry["relation"]), weight))

    if mode is Mode.COMPLETENESS:
        low, high, penalty = 0, zoo.M, 0.0
    else:
        high = zoo.M if config.budget_high is None else min(int(config.budget_high), zoo.M)
        low, penalty = min(config.budget_low, high), config.penalty
    return ConstraintSet(tuple(hard), tuple(soft), low, high, penalty, mode, key)


def target_predicate(key: DirectionKey, zoo: Zoo, config: CompilerConfig | None = None) -> Predicate:
    """Ground-truth predicate for coverage/precision of an LF key.

    For precise keys this is the compiled hard clause; general keys fall back
    to the family's baseline attribute (output price for "cheaper").
    """
    config = config or default_config()
    if key.kind is KeyKind.LF_PD:
        return compile_key(key, zoo, Mode.COMPLETENESS, config).hard[0]
    if key.kind is KeyKind.LF_GD:
        entry = config.directions[key.direction]
        return relative_predicate(config.gd_target[entry["family"]], entry["relation"])
    raise CompileError(key.raw, "no target set for key")
