from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .channel import FadingState, capacity

PROB_TOL = 1e-12
ARRIVAL_KINDS = ("constant", "bernoulli-batch", "uniform")


@dataclass(frozen=True)
class ArrivalSpec:
    """I.i.d. per-slot arrivals with mean ``rate`` bits and support in ``[0, bound]``.

    For ``bernoulli-batch`` the bound is the batch size and a batch arrives
    with probability ``rate / bound`` (default bound ``2 * rate``).
    """

    kind: str = "bernoulli-batch"
    rate: float = 0.0
    bound: float | None = None

    def __post_init__(self):
        if self.kind not in ARRIVAL_KINDS:
            raise ValueError(f"unknown arrival kind {self.kind!r}; expected one of {ARRIVAL_KINDS}")
        if not (self.rate >= 0 and math.isfinite(self.rate)):
            raise ValueError(f"arrival rate must be finite and >= 0, got {self.rate!r}")
        if self.bound is not None and self.bound < self.natural_bound - 1e-15:
            raise ValueError(f"arrival bound {self.bound} is below the {self.kind} maximum {self.natural_bound}")

    @property
    def natural_bound(self) -> float:
        return self.rate if self.kind == "constant" else 2.0 * self.rate

    @property
    def max_arrival(self) -> float:
        if self.kind == "bernoulli-batch" and self.bound is not None:
            return self.bound
        return self.natural_bound

    def with_rate(self, rate: float) -> "ArrivalSpec":
        # A fixed bound only makes sense for the rate it was written for.
        return ArrivalSpec(self.kind, rate, None)


@dataclass(frozen=True)
class SimSettings:
    horizon: int = 1_000_000
    seeds: tuple[int, ...] = (0, 1, 2)
    checkpoints: int = 1000


@dataclass(frozen=True)
class Scenario:
    """Gain alphabet, fading-state distribution and power budget."""

    alphabet: tuple[float, ...]
    support: tuple[tuple[FadingState, float], ...]
    power: float
    arrival: ArrivalSpec = field(default_factory=ArrivalSpec)
    sim: SimSettings = field(default_factory=SimSettings)
    tolerance: float = 1e-9

    def __post_init__(self):
        object.__setattr__(self, "alphabet", tuple(sorted({float(v) for v in self.alphabet})))
        object.__setattr__(
            self, "support", tuple((FadingState(*(float(v) for v in f)), float(p)) for f, p in self.support)
        )
        validate(self)

    @property
    def states(self) -> list[FadingState]:
        return [f for f, _ in self.support]

    @property
    def probs(self) -> list[float]:
        return [p for _, p in self.support]


class ScenarioError(ValueError):
    pass


def validate(sc: Scenario) -> None:
    if not sc.alphabet:
        raise ScenarioError("alphabet is empty")
    if sc.alphabet[0] < 0:
        raise ScenarioError(f"alphabet contains negative gain {sc.alphabet[0]}")
    if not sc.power > 0:
        raise ScenarioError(f"power must be positive, got {sc.power}")
    if not sc.support:
        raise ScenarioError("no fading states given")
    fset = set(sc.alphabet)
    seen = set()
    for f, p in sc.support:
        if f in seen:
            raise ScenarioError(f"state {list(f)} listed twice")
        seen.add(f)
        bad = [v for v in f if v not in fset]
        if bad:
            raise ScenarioError(f"state {list(f)} uses gain {bad[0]:g} not in alphabet {list(sc.alphabet)}")
        if not p > 0:
            raise ScenarioError(f"state {list(f)} has non-positive probability {p}")
    total = math.fsum(sc.probs)
    if abs(total - 1.0) > PROB_TOL:
        raise ScenarioError(f"state probabilities sum to {total!r}, not 1")


FIGURE2_ALPHABET = (0.0, 1.0, 10.0)
FIGURE2_STATES = (
    FadingState(0.0, 0.0, 0.0, 0.0),
    FadingState(0.0, 0.0, 10.0, 10.0),
    FadingState(1.0, 1.0, 0.0, 0.0),
    FadingState(1.0, 1.0, 10.0, 10.0),
)


def figure2_scenario(gamma: float, arrival: ArrivalSpec | None = None) -> Scenario:
    """Outage example: each hop is independently in outage with probability ``gamma``."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"gamma must lie in [0, 1], got {gamma}")
    gb = 1.0 - gamma
    probs = (gamma * gamma, gamma * gb, gb * gamma, gb * gb)
    support = tuple((f, p) for f, p in zip(FIGURE2_STATES, probs) if p > 0)
    total = math.fsum(p for _, p in support)
    support = tuple((f, p / total) for f, p in support)
    return Scenario(FIGURE2_ALPHABET, support, 1.0, arrival or ArrivalSpec())


def figure2_closed_forms(gamma: float) -> tuple[float, float]:
    """(synchronous, asynchronous) rates of the outage example in closed form."""
    gb = 1.0 - gamma
    c = capacity(20.0 / 11.0)
    return 0.5 * gb * gb * c, (0.5 * gb * gb + gamma * gb) * c


def single_state_scenario(f: Sequence[float], power: float = 1.0) -> Scenario:
    return Scenario(tuple(set(f)), ((FadingState(*f), 1.0),), power)
