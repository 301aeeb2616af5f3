"""Back-pressure scheduling over rate-tagged virtual queues.

This is the readable, object-level form of the scheduler: queues hold packet
tokens and every decision goes through :func:`backpressure_decide`.  Long
trajectories use the array kernel in :mod:`afrelay.kernel`, which implements
the same rule slot for slot.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field

from .channel import FadingState, RateTable
from .region import membership_Id, membership_Is

RELAYS = (1, 2)


@dataclass(frozen=True)
class Packet:
    state: FadingState
    payload: float
    birth: int


class ActionKind(enum.IntEnum):
    IDLE = 0
    SOURCE = 1
    RELAY = 2


@dataclass(frozen=True)
class Action:
    kind: ActionKind
    g: FadingState | None = None
    weight: float = 0.0

    @classmethod
    def idle(cls) -> "Action":
        return cls(ActionKind.IDLE)


@dataclass
class QueueState:
    q_s: float = 0.0
    relays: dict[int, dict[FadingState, deque]] = field(
        default_factory=lambda: {n: {} for n in RELAYS}
    )
    t: int = 0
    delivered: float = 0.0
    last_moved: float = 0.0
    enqueued: dict[FadingState, int] = field(default_factory=dict)
    drained: dict[FadingState, int] = field(default_factory=dict)

    def count(self, n: int, g) -> int:
        fifo = self.relays[n].get(g)
        return 0 if fifo is None else len(fifo)

    def total(self, g) -> int:
        return self.count(1, g) + self.count(2, g)

    def virtual_states(self) -> set[FadingState]:
        return set(self.relays[1]) | set(self.relays[2])

    def weighted_backlog(self, rates: RateTable) -> float:
        return self.q_s + sum(rates.rate(g) * self.total(g) for g in sorted(self.virtual_states()))


def source_weight(g, queues: QueueState, rates: RateTable) -> float:
    r = rates.rate(g)
    return (queues.q_s - r * queues.total(g)) * r


def relay_weight(g, queues: QueueState, rates: RateTable) -> float:
    r = rates.rate(g)
    return (r * queues.total(g)) * r


def backpressure_decide(f, queues: QueueState, rates: RateTable) -> Action:
    """Pick the source or relay transmission with the larger back-pressure weight.

    Only the realised fading state ``f`` is consulted, never its probability.
    Ties between candidates go to the lexicographically smallest ``g``; a tie
    between the best source and best relay weights goes to the source.  When
    no candidate has positive weight the slot is idle.
    """
    f = FadingState(*f)
    by_src, by_dst = rates.grouped()
    best_s, g_s = float("-inf"), None
    for g in by_src.get(f.source_part, ()):
        w = source_weight(g, queues, rates)
        if w > best_s:
            best_s, g_s = w, g
    best_d, g_d = float("-inf"), None
    for g in by_dst.get(f.relay_part, ()):
        w = relay_weight(g, queues, rates)
        if w > best_d:
            best_d, g_d = w, g
    if g_s is not None and best_s > 0 and best_s >= best_d:
        return Action(ActionKind.SOURCE, g_s, best_s)
    if g_d is not None and best_d > 0:
        return Action(ActionKind.RELAY, g_d, best_d)
    return Action.idle()


def apply_action(queues: QueueState, action: Action, rates: RateTable, strict: bool = False) -> QueueState:
    """Execute ``action`` in place and advance the slot counter.

    A source transmission moves ``min(q_s, r_g)`` real bits into one packet
    that lands in both relays' queue for ``g``.  With ``strict`` a source
    action that cannot fill a whole packet is dropped and the slot idles.
    """
    moved = 0.0
    if action.kind is ActionKind.SOURCE:
        g = action.g
        r = rates.rate(g)
        if strict and queues.q_s < r:
            pass
        else:
            moved = min(queues.q_s, r)
            queues.q_s -= moved
            pkt = Packet(g, moved, queues.t)
            for n in RELAYS:
                queues.relays[n].setdefault(g, deque()).append(pkt)
            queues.enqueued[g] = queues.enqueued.get(g, 0) + 1
    elif action.kind is ActionKind.RELAY:
        g = action.g
        heads = []
        for n in RELAYS:
            fifo = queues.relays[n].get(g)
            assert fifo, f"relay {n} has no packet for {tuple(g)}"
            heads.append(fifo.popleft())
        assert heads[0] is heads[1]
        moved = heads[0].payload
        queues.delivered += moved
        queues.drained[g] = queues.drained.get(g, 0) + 1
    queues.last_moved = moved
    queues.t += 1
    return queues


def lyapunov_value(queues: QueueState, rates: RateTable) -> float:
    """Quadratic queue energy ``q_s^2 + sum over relays and g of (r_g q)^2``."""
    v = queues.q_s * queues.q_s
    for n in RELAYS:
        for g in sorted(queues.relays[n]):
            x = rates.rate(g) * queues.count(n, g)
            v += x * x
    return v
