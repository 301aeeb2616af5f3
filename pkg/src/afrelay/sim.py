"""Trajectory simulation, stability classification and the outage-example table."""

from __future__ import annotations

import enum
import logging
import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import kernel
from .channel import FadingState, RateTable, build_rate_table
from .region import membership_Id, membership_Is, solve_region_minform, synchronous_baseline
from .scenario import (
    FIGURE2_ALPHABET,
    ArrivalSpec,
    Scenario,
    figure2_closed_forms,
    figure2_scenario,
)
from .scheduler import ActionKind, QueueState, apply_action, backpressure_decide

log = logging.getLogger(__name__)

MIN_HORIZON = 10_000
DEFAULT_CHECKPOINTS = 1000


class SlotPlan:
    """Array form of the scheduler's candidate sets for a fixed list of fading states.

    Virtual queues exist only for positive-rate states, indexed in
    lexicographic order.  ``fading`` lists every state the channel may visit;
    no probabilities are involved.
    """

    def __init__(self, rates: RateTable, fading: Sequence[Sequence[float]]):
        self.queue_states = [e.state for e in rates.positive()]
        self.rates = np.array([e.rate for e in rates.positive()], dtype=np.float64)
        self.fading = [FadingState(*f) for f in fading]
        self.index = {f: i for i, f in enumerate(self.fading)}
        src_ptr, src_idx, dst_ptr, dst_idx = [0], [], [0], []
        for f in self.fading:
            for k, g in enumerate(self.queue_states):
                if membership_Is(f, g):
                    src_idx.append(k)
                if membership_Id(f, g):
                    dst_idx.append(k)
            src_ptr.append(len(src_idx))
            dst_ptr.append(len(dst_idx))
        as_i64 = lambda v: np.array(v, dtype=np.int64)  # noqa: E731
        self.src_ptr, self.src_idx = as_i64(src_ptr), as_i64(src_idx)
        self.dst_ptr, self.dst_idx = as_i64(dst_ptr), as_i64(dst_idx)

    def run(self, state_idx, arrivals, strict=False, every=0, log=False, backend=None):
        fn = kernel.get_backend(backend)
        return fn(state_idx, arrivals, self.rates, self.src_ptr, self.src_idx,
                  self.dst_ptr, self.dst_idx, strict, every, log)


def draw_arrivals(spec: ArrivalSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    if spec.kind == "constant":
        return np.full(n, spec.rate)
    if spec.kind == "uniform":
        return rng.uniform(0.0, 2.0 * spec.rate, n)
    batch = spec.max_arrival
    if batch == 0:
        return np.zeros(n)
    p = spec.rate / batch
    return np.where(rng.random(n) < p, batch, 0.0)


def _streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    fading_ss, arrival_ss = np.random.SeedSequence(seed).spawn(2)
    return np.random.default_rng(fading_ss), np.random.default_rng(arrival_ss)


def draw_fading(scenario: Scenario, n: int, rng: np.random.Generator) -> np.ndarray:
    probs = np.array(scenario.probs)
    return rng.choice(len(probs), size=n, p=probs / probs.sum())


@dataclass
class TrajectoryStats:
    horizon: int
    seed: int
    arrival_rate: float
    arrived: float
    delivered: float
    checkpoint_slots: np.ndarray
    backlog: np.ndarray
    q_s: float
    queues: dict[FadingState, int]
    enqueued: dict[FadingState, int]
    drained: dict[FadingState, int]
    actions: dict[str, int]
    mean_delay: float
    backend: str
    queue_states: list[FadingState] = field(default_factory=list, repr=False)
    fading: list[FadingState] = field(default_factory=list, repr=False)
    log: dict | None = field(default=None, repr=False)

    @property
    def delivered_rate(self) -> float:
        return self.delivered / self.horizon


def run_trajectory(scenario: Scenario, rates: RateTable, arrival: ArrivalSpec | None = None,
                   horizon: int | None = None, seed: int = 0, checkpoints: int = DEFAULT_CHECKPOINTS,
                   strict: bool = False, event_log: bool = False, backend: str | None = None,
                   ) -> TrajectoryStats:
    """Simulate the back-pressure scheduler for ``horizon`` slots.

    Fading states and arrivals come from two independent streams spawned
    from ``seed``; the scheduler sees only the realised state of each slot.
    """
    arrival = arrival or scenario.arrival
    horizon = int(horizon or scenario.sim.horizon)
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if horizon < MIN_HORIZON:
        log.warning("horizon %d below %d slots; stability verdict will be inconclusive", horizon, MIN_HORIZON)
    fading_rng, arrival_rng = _streams(seed)
    state_idx = draw_fading(scenario, horizon, fading_rng)
    arrivals = draw_arrivals(arrival, horizon, arrival_rng)
    plan = SlotPlan(rates, scenario.states)
    return _collect(plan, state_idx, arrivals, seed, arrival.rate, checkpoints, strict, event_log, backend)


def _collect(plan: SlotPlan, state_idx, arrivals, seed, rate, checkpoints, strict, event_log, backend):
    horizon = len(state_idx)
    every = max(horizon // checkpoints, 1) if checkpoints else 0
    out = plan.run(state_idx, arrivals, strict=strict, every=every, log=event_log, backend=backend)
    n_cp = len(out["backlog"])
    qstates = plan.queue_states
    drained_total = int(out["drained"].sum())
    stats = TrajectoryStats(
        horizon=horizon,
        seed=seed,
        arrival_rate=rate,
        arrived=math.fsum(arrivals),
        delivered=out["delivered"],
        checkpoint_slots=every * np.arange(1, n_cp + 1, dtype=np.int64),
        backlog=out["backlog"],
        q_s=out["q_s"],
        queues={g: int(c) for g, c in zip(qstates, out["queues"]) if c},
        enqueued={g: int(c) for g, c in zip(qstates, out["enqueued"]) if c},
        drained={g: int(c) for g, c in zip(qstates, out["drained"]) if c},
        actions=dict(zip(("idle", "source", "relay"), map(int, out["action_counts"]))),
        mean_delay=out["delay_sum"] / drained_total if drained_total else float("nan"),
        backend=backend or kernel.BACKEND,
        queue_states=qstates,
        fading=plan.fading,
        log=out.get("log"),
    )
    if event_log:
        stats.log["state"] = np.asarray(state_idx)
    if log.isEnabledFor(logging.DEBUG):
        v = stats.q_s ** 2 + 2 * sum((r * stats.queues.get(g, 0)) ** 2 for g, r in zip(qstates, plan.rates))
        log.debug("seed=%d lambda=%g final q_s=%.6g lyapunov=%.6g", seed, rate, stats.q_s, v)
    return stats


def simulate_sequence(rates: RateTable, fading: Sequence[Sequence[float]], state_idx, arrivals,
                      seed: int = 0, checkpoints: int = DEFAULT_CHECKPOINTS, strict: bool = False,
                      event_log: bool = False, backend: str | None = None) -> TrajectoryStats:
    """Run the scheduler on an explicit fading-index and arrival sequence."""
    arrivals = np.asarray(arrivals, dtype=np.float64)
    rate = float(arrivals.mean()) if len(arrivals) else 0.0
    return _collect(SlotPlan(rates, fading), np.asarray(state_idx, dtype=np.int64), arrivals,
                    seed, rate, checkpoints, strict, event_log, backend)


def step_trajectory(scenario: Scenario, rates: RateTable, arrival: ArrivalSpec | None = None,
                    horizon: int = 1000, seed: int = 0, strict: bool = False, debug: bool = False):
    """Slot-by-slot run through the object-level scheduler.

    Yields ``(f, action, queues)`` after each slot; the queue object is
    mutated in place.  Uses the same random streams as :func:`run_trajectory`.
    With ``debug`` every slot asserts action eligibility and relay symmetry.
    """
    arrival = arrival or scenario.arrival
    fading_rng, arrival_rng = _streams(seed)
    state_idx = draw_fading(scenario, horizon, fading_rng)
    arrivals = draw_arrivals(arrival, horizon, arrival_rng)
    states = scenario.states
    queues = QueueState()
    for t in range(horizon):
        f = states[state_idx[t]]
        queues.q_s += float(arrivals[t])
        action = backpressure_decide(f, queues, rates)
        if debug:
            if action.kind is ActionKind.SOURCE:
                assert membership_Is(f, action.g), (t, f, action)
            elif action.kind is ActionKind.RELAY:
                assert membership_Id(f, action.g), (t, f, action)
        apply_action(queues, action, rates, strict=strict)
        if debug:
            for g in queues.virtual_states():
                assert queues.count(1, g) == queues.count(2, g), (t, g)
        yield f, action, queues


class Verdict(enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class StabilityVerdict:
    verdict: Verdict
    slope: float
    delivered_rate: float

    @property
    def stable(self) -> bool:
        return self.verdict is Verdict.STABLE


def backlog_slope(stats: TrajectoryStats) -> float:
    """Least-squares slope of the weighted backlog over the last half of checkpoints."""
    n = len(stats.backlog)
    if n < 2:
        return float("nan")
    lo = n // 2
    x = stats.checkpoint_slots[lo:].astype(np.float64)
    y = stats.backlog[lo:]
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def classify_stability(stats: TrajectoryStats, lam: float | None = None,
                       slope_frac: float = 0.05, delivery_frac: float = 0.95) -> StabilityVerdict:
    """Empirical stability: flat backlog and near-complete delivery.

    Stable iff the backlog slope is below ``slope_frac * lam`` and the
    delivered rate is at least ``delivery_frac * lam``.  For ``lam == 0`` a
    non-increasing backlog counts as flat.
    """
    lam = stats.arrival_rate if lam is None else lam
    slope = backlog_slope(stats)
    delivered = stats.delivered_rate
    if stats.horizon < MIN_HORIZON or len(stats.backlog) < 4:
        return StabilityVerdict(Verdict.INCONCLUSIVE, slope, delivered)
    flat = slope < slope_frac * lam or (lam == 0 and slope <= 0)
    ok = flat and delivered >= delivery_frac * lam
    return StabilityVerdict(Verdict.STABLE if ok else Verdict.UNSTABLE, slope, delivered)


@dataclass(frozen=True)
class SweepRow:
    lam: float
    seed: int
    slope: float
    delivered: float
    verdict: Verdict


def _sweep_task(args):
    scenario, rates, arrival, horizon, seed, strict, backend = args
    stats = run_trajectory(scenario, rates, arrival, horizon, seed, strict=strict, backend=backend)
    v = classify_stability(stats, arrival.rate)
    return SweepRow(arrival.rate, seed, v.slope, v.delivered_rate, v.verdict)


def sweep_lambda(scenario: Scenario, rates: RateTable, lambdas: Iterable[float], horizon: int,
                 seeds: Sequence[int], arrival_kind: str | None = None, workers: int = 1,
                 strict: bool = False, backend: str | None = None) -> list[SweepRow]:
    """One verdict per ``(lambda, seed)``, ordered by lambda then seed."""
    lambdas = list(lambdas)
    if lambdas != sorted(lambdas):
        raise ValueError("lambda grid must be sorted ascending")
    kind = arrival_kind or scenario.arrival.kind
    tasks = [
        (scenario, rates, ArrivalSpec(kind, lam), horizon, seed, strict, backend)
        for lam in lambdas for seed in seeds
    ]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(workers) as pool:
            rows = list(pool.map(_sweep_task, tasks))
    else:
        rows = [_sweep_task(t) for t in tasks]
    return sorted(rows, key=lambda r: (r.lam, r.seed))


def majority(rows: Iterable[SweepRow]) -> dict[float, Verdict]:
    """Seed-majority verdict per lambda; ties and inconclusive majorities are inconclusive."""
    by_lam: dict[float, Counter] = {}
    for row in rows:
        by_lam.setdefault(row.lam, Counter())[row.verdict] += 1
    out = {}
    for lam, votes in by_lam.items():
        n = sum(votes.values())
        winner = next((v for v in (Verdict.STABLE, Verdict.UNSTABLE) if 2 * votes[v] > n), None)
        out[lam] = winner or Verdict.INCONCLUSIVE
    return out


@lru_cache(maxsize=4)
def figure2_rates(tol: float = 1e-9) -> RateTable:
    return build_rate_table(FIGURE2_ALPHABET, 1.0, tol)


@dataclass(frozen=True)
class Figure2Row:
    gamma: float
    r_sync: float
    r_async: float
    r_max_lp: float


def figure2(gammas: Iterable[float], rates: RateTable | None = None) -> list[Figure2Row]:
    """Synchronous rate, asynchronous closed form and LP optimum per outage probability."""
    rates = rates or figure2_rates()
    rows = []
    for gamma in gammas:
        gamma = float(gamma)
        sc = figure2_scenario(gamma)
        _, r_async = figure2_closed_forms(gamma)
        rows.append(Figure2Row(gamma, synchronous_baseline(sc, rates), r_async,
                               solve_region_minform(sc, rates).r_max))
    return rows


def action_name(kind: int) -> str:
    return ActionKind(kind).name.lower()

