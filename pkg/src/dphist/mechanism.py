"""Laplace mechanism, strategy sensitivities and epsilon bookkeeping.

Noise is binary64 and unsnapped; the floating-point attacks on textbook
Laplace sampling are not mitigated here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ParameterError
from .histogram import TreeLayout

_U53 = 2**53


@dataclass(frozen=True)
class PrivacyParams:
    epsilon: float
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon}")
        if not 0 <= self.seed < 2**64:
            raise ParameterError(f"seed must be an unsigned 64-bit integer, got {self.seed}")


@dataclass(frozen=True)
class Strategy:
    """Query strategy: unit counts ``L``, sorted counts ``S`` or a k-ary tree ``H``."""

    name: str
    k: int | None = None

    def __post_init__(self):
        name = self.name.upper()
        if name not in ("L", "S", "H"):
            raise ParameterError(f"unknown strategy {self.name!r}")
        object.__setattr__(self, "name", name)
        if name == "H":
            if self.k is None or self.k < 2:
                raise ParameterError("strategy H needs a branching factor k >= 2")
        elif self.k is not None:
            raise ParameterError(f"strategy {name} takes no branching factor")

    @classmethod
    def L(cls) -> "Strategy":
        return cls("L")

    @classmethod
    def S(cls) -> "Strategy":
        return cls("S")

    @classmethod
    def H(cls, k: int = 2) -> "Strategy":
        return cls("H", k)

    @classmethod
    def parse(cls, token: str, k: int = 2) -> "Strategy":
        return cls.H(k) if token.upper() == "H" else cls(token)

    @property
    def label(self) -> str:
        return f"H(k={self.k})" if self.name == "H" else self.name


@dataclass(frozen=True)
class NoisyVector:
    values: np.ndarray
    strategy: Strategy
    epsilon: float
    sensitivity: float
    layout: TreeLayout | None = None


@dataclass
class BudgetLedger:
    """Running sum of the epsilons spent by successive releases."""

    entries: list[tuple[str, float]] = field(default_factory=list)

    @property
    def total(self) -> float:
        return math.fsum(eps for _, eps in self.entries)

    def spend(self, label: str, epsilon: float) -> None:
        if not epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {epsilon}")
        self.entries.append((label, float(epsilon)))

    def to_dict(self) -> dict:
        return {
            "entries": [{"label": label, "epsilon": eps} for label, eps in self.entries],
            "total": self.total,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BudgetLedger":
        return cls([(e["label"], float(e["epsilon"])) for e in data.get("entries", [])])


def trial_rng(seed: int, *stream: int) -> np.random.Generator:
    """Independent generator for one (seed, stream...) coordinate.

    Mixing the trial index into the seed material keeps parallel trials
    reproducible no matter how they are scheduled.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, stream)])))


def open_uniform(rng: np.random.Generator, size=None):
    """Uniform draws strictly inside (0, 1) on a 2^-53 grid (exactly representable)."""
    return rng.integers(1, _U53, size=size, dtype=np.int64) / _U53


def laplace_from_uniform(u, scale: float):
    """Inverse CDF of the zero-mean Laplace distribution with the given scale."""
    u = np.asarray(u, dtype=float) - 0.5
    return -scale * np.sign(u) * np.log1p(-2.0 * np.abs(u))


def laplace_sample(scale: float, rng: np.random.Generator) -> float:
    if not scale > 0:
        raise ParameterError(f"Laplace scale must be positive, got {scale}")
    return float(laplace_from_uniform(open_uniform(rng), scale))


def laplace_noise(scale: float, size, rng: np.random.Generator) -> np.ndarray:
    if not scale > 0:
        raise ParameterError(f"Laplace scale must be positive, got {scale}")
    return laplace_from_uniform(open_uniform(rng, size), scale)


def sensitivity_of(strategy: Strategy, layout: TreeLayout | None = None) -> float:
    if strategy.name == "H":
        if layout is None:
            raise ParameterError("strategy H needs a tree layout to determine its sensitivity")
        if layout.k != strategy.k:
            raise ParameterError(f"layout has k={layout.k} but strategy has k={strategy.k}")
        return float(layout.height)
    if layout is not None:
        raise ParameterError(f"strategy {strategy.name} does not use a tree layout")
    return 1.0


def privatize(
    truth: Sequence[float],
    strategy: Strategy,
    params: PrivacyParams,
    layout: TreeLayout | None = None,
    ledger: BudgetLedger | None = None,
    rng: np.random.Generator | None = None,
) -> NoisyVector:
    """Add i.i.d. Laplace(sensitivity / epsilon) noise to every answer.

    Without an explicit ``rng`` the noise stream is derived from
    ``params.seed`` alone, so identical calls release identical vectors.
    """
    truth = np.asarray(truth, dtype=float)
    sensitivity = sensitivity_of(strategy, layout)
    if layout is not None and truth.shape != (layout.total_nodes,):
        raise ParameterError(f"truth has {truth.size} entries, layout has {layout.total_nodes} nodes")
    if rng is None:
        rng = trial_rng(params.seed)
    values = truth + laplace_noise(sensitivity / params.epsilon, truth.shape, rng)
    if ledger is not None:
        ledger.spend(strategy.label, params.epsilon)
    return NoisyVector(values, strategy, params.epsilon, sensitivity, layout)
