"""AF achievable rate per fading state.

A packet encoded for state ``g = [g_s1, g_s2, g_1d, g_2d]`` is broadcast by the
source while the source-relay gains are ``(g_s1, g_s2)`` and forwarded by both
relays while the relay-destination gains are ``(g_1d, g_2d)``.  Its rate is the
best end-to-end AF rate over per-state power choices bounded by ``P``.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Sequence

import numpy as np

DEFAULT_TOL = 1e-9
GUARD_STEPS = 50
_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


class FadingState(NamedTuple):
    g_s1: float
    g_s2: float
    g_1d: float
    g_2d: float

    @property
    def source_part(self) -> tuple[float, float]:
        return (self.g_s1, self.g_s2)

    @property
    def relay_part(self) -> tuple[float, float]:
        return (self.g_1d, self.g_2d)


class PowerAllocation(NamedTuple):
    p_s: float
    p_1: float
    p_2: float


def capacity(x: float) -> float:
    """Gaussian capacity ``0.5*log2(1+x)`` in bits per block."""
    if x < 0:
        raise ValueError(f"capacity undefined for negative SNR {x!r}")
    return 0.5 * math.log2(1.0 + x)


def _snr(g: Sequence[float], p_s, p_1, p_2):
    # Works on floats and on broadcast numpy arrays alike.
    g_s1, g_s2, g_1d, g_2d = g
    c1 = g_1d * p_1 / (g_s1 * p_s + 1.0)
    c2 = g_2d * p_2 / (g_s2 * p_s + 1.0)
    amp = np.sqrt(g_s1 * c1) + np.sqrt(g_s2 * c2)
    return p_s * amp * amp / (c1 + c2 + 1.0)


def af_objective(g: Sequence[float], alloc: Sequence[float]) -> float:
    """End-to-end AF rate for state ``g`` at a fixed power allocation."""
    p_s, p_1, p_2 = alloc
    x = float(_snr(g, p_s, p_1, p_2))
    if x <= 0.0:
        return 0.0
    return capacity(x)


def _golden_max(fn, lo: float, hi: float, xtol: float) -> tuple[float, float]:
    """Maximise a unimodal scalar function on ``[lo, hi]``; endpoints included."""
    a, b = lo, hi
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = fn(c), fn(d)
    while b - a > xtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = fn(d)
    best_x, best_f = (c, fc) if fc >= fd else (d, fd)
    for x in (lo, hi):
        fx = fn(x)
        if fx > best_f:
            best_x, best_f = x, fx
    return best_x, best_f


def _grid_max(g: Sequence[float], P: float, steps: int) -> tuple[float, PowerAllocation]:
    axis = np.linspace(0.0, P, steps + 1)
    ps = axis[:, None, None]
    p1 = axis[None, :, None]
    p2 = axis[None, None, :]
    x = _snr(g, ps, p1, p2)
    idx = np.unravel_index(int(np.argmax(x)), x.shape)
    alloc = PowerAllocation(float(axis[idx[0]]), float(axis[idx[1]]), float(axis[idx[2]]))
    return af_objective(g, alloc), alloc


def _coordinate_refine(g, P, alloc: PowerAllocation, xtol: float) -> tuple[float, PowerAllocation]:
    # Cyclic golden-section polish around a grid point; used only when the
    # boundary slices lose to the guard grid.
    cur = list(alloc)
    best = af_objective(g, cur)
    for _ in range(50):
        prev = best
        for i in range(3):
            def along(v, i=i):
                trial = list(cur)
                trial[i] = v
                return af_objective(g, trial)
            cur[i], best = _golden_max(along, 0.0, P, xtol)
        if best - prev <= xtol:
            break
    return best, PowerAllocation(*cur)


def af_rate(g: Sequence[float], P: float, tol: float = DEFAULT_TOL) -> tuple[float, PowerAllocation]:
    """Maximum AF rate for state ``g`` under per-node power budget ``P``.

    The source runs at full power and one relay is pinned at ``P``; the other
    relay's power is found by golden-section search on each of the two
    slices.  A coarse 3-D grid guards against the slices missing the optimum.
    """
    if P <= 0:
        raise ValueError(f"power budget must be positive, got {P!r}")
    g = FadingState(*(float(v) for v in g))
    if min(g) < 0:
        raise ValueError(f"negative gain in {tuple(g)}")
    if (g.g_s1 == 0 and g.g_s2 == 0) or (g.g_1d == 0 and g.g_2d == 0):
        return 0.0, PowerAllocation(0.0, 0.0, 0.0)

    xtol = tol * P
    p2_opt, rate_a = _golden_max(lambda v: af_objective(g, (P, P, v)), 0.0, P, xtol)
    p1_opt, rate_b = _golden_max(lambda v: af_objective(g, (P, v, P)), 0.0, P, xtol)
    if rate_a >= rate_b:
        rate, alloc = rate_a, PowerAllocation(P, P, p2_opt)
    else:
        rate, alloc = rate_b, PowerAllocation(P, p1_opt, P)

    guard_rate, guard_alloc = _grid_max(g, P, GUARD_STEPS)
    if guard_rate > rate + tol:
        rate, alloc = _coordinate_refine(g, P, guard_alloc, xtol)
    return rate, alloc


@dataclass(frozen=True)
class RateEntry:
    state: FadingState
    rate: float
    alloc: PowerAllocation


class RateTable:
    """Rates ``r_g`` for every state in ``F^4`` in lexicographic order."""

    CSV_HEADER = ("g_s1", "g_s2", "g_1d", "g_2d", "rate", "p_s", "p_1", "p_2")

    def __init__(self, entries: Iterable[RateEntry], power: float):
        self.power = power
        self._entries = {e.state: e for e in sorted(entries, key=lambda e: tuple(e.state))}
        self._groups = None

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[RateEntry]:
        return iter(self._entries.values())

    def __contains__(self, g) -> bool:
        return FadingState(*g) in self._entries

    def entry(self, g) -> RateEntry:
        return self._entries[FadingState(*g)]

    def rate(self, g) -> float:
        return self._entries[FadingState(*g)].rate

    def states(self) -> list[FadingState]:
        return list(self._entries)

    def positive(self) -> list[RateEntry]:
        return [e for e in self._entries.values() if e.rate > 0.0]

    def grouped(self) -> tuple[dict, dict]:
        """Positive-rate states keyed by source part and by relay part."""
        if self._groups is None:
            by_src: dict[tuple, list[FadingState]] = {}
            by_dst: dict[tuple, list[FadingState]] = {}
            for e in self.positive():
                by_src.setdefault(e.state.source_part, []).append(e.state)
                by_dst.setdefault(e.state.relay_part, []).append(e.state)
            self._groups = (by_src, by_dst)
        return self._groups

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(self.CSV_HEADER)
        for e in self:
            w.writerow([_fmt(v) for v in (*e.state, e.rate, *e.alloc)])

    @classmethod
    def read_csv(cls, fh, power: float) -> "RateTable":
        rows = csv.DictReader(fh)
        entries = []
        for row in rows:
            state = FadingState(*(float(row[k]) for k in cls.CSV_HEADER[:4]))
            alloc = PowerAllocation(*(float(row[k]) for k in cls.CSV_HEADER[5:]))
            entries.append(RateEntry(state, float(row["rate"]), alloc))
        return cls(entries, power)


def _fmt(v: float) -> str:
    return format(v, ".12g")


def build_rate_table(alphabet: Iterable[float], P: float, tol: float = DEFAULT_TOL,
                     states: Iterable[Sequence[float]] | None = None) -> RateTable:
    """Apply :func:`af_rate` to every state of ``alphabet^4``.

    ``states`` restricts the evaluation to a subset of ``alphabet^4``; the
    remaining states are then absent from the table.
    """
    F = sorted({float(v) for v in alphabet})
    if not F:
        raise ValueError("gain alphabet is empty")
    if F[0] < 0:
        raise ValueError(f"negative gain {F[0]} in alphabet")
    if states is None:
        todo = itertools.product(F, repeat=4)
    else:
        fset = set(F)
        todo = []
        for s in states:
            s = tuple(float(v) for v in s)
            if not set(s) <= fset:
                raise ValueError(f"state {s} has gains outside the alphabet {F}")
            todo.append(s)
    entries = []
    for s in todo:
        rate, alloc = af_rate(s, P, tol)
        entries.append(RateEntry(FadingState(*s), rate, alloc))
    return RateTable(entries, P)
