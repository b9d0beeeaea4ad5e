"""Local stand-ins for the router agent, used for closed-loop tests and batches."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Union

import numpy as np

from ..dirkey import CompileError, CompilerConfig, KeyKind, Mode, classify, compile_key
from ..prior.library import PredicateLibrary, build_library
from ..prior.runs import sigmoid
from ..solver import build_instance, solve
from ..zoo import Endpoint, Zoo

MALFORMED_REPLY = "I could not interpret the requested direction."


@dataclass(frozen=True)
class Oracle:
    """Compile the key and print the solver's selection."""

    mode: Mode = Mode.COMPLETENESS


@dataclass(frozen=True)
class PriorSampler:
    """Ignore the key; draw x_m ~ Bernoulli(sigmoid(b + psi_m . w))."""

    weights: Mapping[str, float]
    intercept: float


@dataclass(frozen=True)
class Noisy:
    """Oracle output with each bit flipped independently with probability ``flip``."""

    flip: float
    mode: Mode = Mode.COMPLETENESS

    def __post_init__(self):
        if not 0.0 <= self.flip <= 1.0:
            raise ValueError("flip probability must lie in [0, 1]")


Behavior = Union[Oracle, PriorSampler, Noisy]


def format_mask(bits) -> str:
    return " ".join(str(int(b)) for b in bits)


def _oracle_bits(zoo: Zoo, current: Endpoint | None, d: str, mode: Mode,
                 config: CompilerConfig | None) -> np.ndarray | None:
    key = classify(d, config)
    if key.kind is KeyKind.UNRECOGNIZED:
        return None
    try:
        cs = compile_key(key, zoo, mode, config)
    except CompileError:
        return None
    sel = solve(build_instance(cs, zoo, current))
    return sel.chosen


@dataclass
class AgentSimulator:
    """Callable simulator bound to a zoo; keeps its own seeded generator."""

    zoo: Zoo
    behavior: Behavior
    seed: int = 0
    config: CompilerConfig | None = None
    lib: PredicateLibrary | None = None
    rng: np.random.Generator = field(init=False)

    def __post_init__(self):
        self.rng = np.random.default_rng(self.seed)
        if isinstance(self.behavior, PriorSampler) and self.lib is None:
            self.lib = build_library(self.zoo)

    def __call__(self, current: Endpoint | None, d: str) -> str:
        return simulate_agent(self.zoo, current, d, self.behavior, self.rng, self.config, self.lib)


def simulate_agent(
    zoo: Zoo,
    current: Endpoint | None,
    d: str,
    behavior: Behavior,
    rng: np.random.Generator | None = None,
    config: CompilerConfig | None = None,
    lib: PredicateLibrary | None = None,
) -> str:
    rng = rng if rng is not None else np.random.default_rng(0)
    if isinstance(behavior, PriorSampler):
        lib = lib or build_library(zoo)
        z = behavior.intercept + lib.matrix @ lib.weight_vector(dict(behavior.weights))
        p = sigmoid(z)
        return format_mask((rng.random(zoo.M) < p).astype(int))

    bits = _oracle_bits(zoo, current, d, behavior.mode, config)
    if bits is None:
        return MALFORMED_REPLY
    if isinstance(behavior, Noisy) and behavior.flip > 0:
        flips = rng.random(zoo.M) < behavior.flip
        bits = np.where(flips, 1 - bits, bits)
    return format_mask(bits)
