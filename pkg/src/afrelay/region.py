"""Stability region of the relay network as a linear program.

Variables are the per-state time-sharing fractions: ``a[f, g]`` (source
sends packets for state ``g`` while the channel is in ``f``) and ``b[f, g]``
(relays forward packets of state ``g`` while the channel is in ``f``).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .channel import FadingState, RateTable, _fmt
from .scenario import Scenario

LP_TOL = 1e-9
_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": LP_TOL,
    "dual_feasibility_tolerance": LP_TOL,
}


class SolverError(RuntimeError):
    pass


def membership_Is(f, g) -> bool:
    """Source broadcast in ``f`` can carry a packet encoded for ``g``."""
    return f[0] == g[0] and f[1] == g[1]


def membership_Id(f, g) -> bool:
    """Relay transmission in ``f`` can deliver a packet encoded for ``g``."""
    return f[2] == g[2] and f[3] == g[3]


@dataclass
class TimeSharing:
    a: dict[tuple[FadingState, FadingState], float] = field(default_factory=dict)
    b: dict[tuple[FadingState, FadingState], float] = field(default_factory=dict)

    def load(self, f) -> float:
        return sum(v for (ff, _), v in self.a.items() if ff == f) + sum(
            v for (ff, _), v in self.b.items() if ff == f
        )


@dataclass
class RegionSolution:
    r_max: float
    sharing: TimeSharing
    fill: dict[FadingState, float]
    drain: dict[FadingState, float]
    form: str = "min"

    def write_csv(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("kind", "f_s1", "f_s2", "f_1d", "f_2d", "g_s1", "g_s2", "g_1d", "g_2d", "value"))
        w.writerow(("r_max", *[""] * 8, _fmt(self.r_max)))
        for kind, fractions in (("a", self.sharing.a), ("b", self.sharing.b)):
            for (f, g), v in sorted(fractions.items()):
                if v > 0:
                    w.writerow((kind, *map(_fmt, f), *map(_fmt, g), _fmt(v)))


class _Layout:
    """Column indexing of the LP restricted to the productive core."""

    def __init__(self, scenario: Scenario, rates: RateTable):
        support = scenario.support
        src_parts = {f.source_part for f, _ in support}
        dst_parts = {f.relay_part for f, _ in support}
        self.core = [
            e.state for e in rates.positive()
            if e.state.source_part in src_parts and e.state.relay_part in dst_parts
        ]
        self.rate = {g: rates.rate(g) for g in self.core}
        self.support = support
        self.a_cols: list[tuple[int, int]] = []
        self.b_cols: list[tuple[int, int]] = []
        for i, (f, _) in enumerate(support):
            for j, g in enumerate(self.core):
                if membership_Is(f, g):
                    self.a_cols.append((i, j))
                if membership_Id(f, g):
                    self.b_cols.append((i, j))
        self.n_a = len(self.a_cols)
        self.n_ab = self.n_a + len(self.b_cols)

    def coeffs(self):
        """Per-column probability*rate weight, g index, f index, is_source flag."""
        rows = []
        for is_a, cols in ((True, self.a_cols), (False, self.b_cols)):
            for i, j in cols:
                pi = self.support[i][1]
                rows.append((pi * self.rate[self.core[j]], j, i, is_a))
        return rows

    def sharing_matrix(self, n_cols: int) -> np.ndarray:
        A = np.zeros((len(self.support), n_cols))
        for col, (_, _, i, _) in enumerate(self.coeffs()):
            A[i, col] = 1.0
        return A

    def unpack(self, x: np.ndarray) -> TimeSharing:
        sh = TimeSharing()
        for col, (i, j) in enumerate(self.a_cols):
            sh.a[(self.support[i][0], self.core[j])] = max(float(x[col]), 0.0)
        for col, (i, j) in enumerate(self.b_cols):
            sh.b[(self.support[i][0], self.core[j])] = max(float(x[self.n_a + col]), 0.0)
        return sh


def _flows(layout: _Layout, sh: TimeSharing) -> tuple[dict, dict]:
    prob = {f: p for f, p in layout.support}
    fill = {g: 0.0 for g in layout.core}
    drain = {g: 0.0 for g in layout.core}
    for (f, g), v in sh.a.items():
        fill[g] += prob[f] * v * layout.rate[g]
    for (f, g), v in sh.b.items():
        drain[g] += prob[f] * v * layout.rate[g]
    return fill, drain


def balance(layout: _Layout, sh: TimeSharing) -> tuple[TimeSharing, dict, dict]:
    """Scale fill and drain of every virtual queue down to their minimum.

    Turns any feasible point of the min-form program into one satisfying
    per-queue flow conservation with the same objective.
    """
    fill, drain = _flows(layout, sh)
    theta, eta = {}, {}
    for g in layout.core:
        m = min(fill[g], drain[g])
        theta[g] = m / fill[g] if fill[g] > 0 else 0.0
        eta[g] = m / drain[g] if drain[g] > 0 else 0.0
    out = TimeSharing(
        {k: v * theta[k[1]] for k, v in sh.a.items()},
        {k: v * eta[k[1]] for k, v in sh.b.items()},
    )
    fill, drain = _flows(layout, out)
    return out, fill, drain


def _solve(c, A_ub, b_ub, A_eq=None, b_eq=None):
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, A_eq=A_eq, b_eq=b_eq, bounds=(0, None),
                  method="highs-ds", options=_HIGHS_OPTIONS)
    return res


def _empty_solution(form: str) -> RegionSolution:
    return RegionSolution(0.0, TimeSharing(), {}, {}, form)


def solve_region_minform(scenario: Scenario, rates: RateTable) -> RegionSolution:
    """Maximise the sum over virtual queues of min(fill rate, drain rate)."""
    lay = _Layout(scenario, rates)
    if not lay.core:
        return _empty_solution("min")
    n_t = len(lay.core)
    n = lay.n_ab + n_t
    c = np.zeros(n)
    c[lay.n_ab:] = -1.0
    # epigraph: t_g <= fill_g and t_g <= drain_g
    A_epi = np.zeros((2 * n_t, n))
    for col, (w, j, _, is_a) in enumerate(lay.coeffs()):
        A_epi[j if is_a else n_t + j, col] = -w
    for j in range(n_t):
        A_epi[j, lay.n_ab + j] = 1.0
        A_epi[n_t + j, lay.n_ab + j] = 1.0
    A_ub = np.vstack([lay.sharing_matrix(n), A_epi])
    b_ub = np.concatenate([np.ones(len(lay.support)), np.zeros(2 * n_t)])
    res = _solve(c, A_ub, b_ub)
    if res.status != 0:
        raise SolverError(f"min-form LP failed: {res.message}")
    sh, fill, drain = balance(lay, lay.unpack(res.x[:lay.n_ab]))
    return RegionSolution(math.fsum(fill.values()), sh, fill, drain, "min")


def solve_region_eqform(scenario: Scenario, rates: RateTable) -> RegionSolution:
    """Maximise total fill rate with fill <= drain for every virtual queue."""
    lay = _Layout(scenario, rates)
    if not lay.core:
        return _empty_solution("eq")
    n_t = len(lay.core)
    n = lay.n_ab
    c = np.zeros(n)
    A_cons = np.zeros((n_t, n))
    for col, (w, j, _, is_a) in enumerate(lay.coeffs()):
        if is_a:
            c[col] = -w
            A_cons[j, col] = w
        else:
            A_cons[j, col] = -w
    A_ub = np.vstack([lay.sharing_matrix(n), A_cons])
    b_ub = np.concatenate([np.ones(len(lay.support)), np.zeros(n_t)])
    res = _solve(c, A_ub, b_ub)
    if res.status != 0:
        raise SolverError(f"eq-form LP failed: {res.message}")
    sh, fill, drain = balance(lay, lay.unpack(res.x))
    return RegionSolution(math.fsum(fill.values()), sh, fill, drain, "eq")


def is_supportable(scenario: Scenario, rates: RateTable, r: float) -> tuple[bool, TimeSharing | None]:
    """Feasibility of throughput ``r`` under flow conservation and time sharing.

    Returns a witness time-sharing when feasible.
    """
    if r < 0:
        raise ValueError(f"rate must be non-negative, got {r}")
    lay = _Layout(scenario, rates)
    if r == 0:
        return True, lay.unpack(np.zeros(lay.n_ab))
    if not lay.core:
        return False, None
    n_t = len(lay.core)
    n = lay.n_ab
    A_eq = np.zeros((n_t + 1, n))
    for col, (w, j, _, is_a) in enumerate(lay.coeffs()):
        pi_only = w / lay.rate[lay.core[j]]
        A_eq[j, col] = pi_only if is_a else -pi_only
        if is_a:
            A_eq[n_t, col] = w
    b_eq = np.zeros(n_t + 1)
    b_eq[n_t] = r
    res = _solve(np.zeros(n), lay.sharing_matrix(n), np.ones(len(lay.support)), A_eq, b_eq)
    if res.status == 2:
        return False, None
    if res.status != 0:
        raise SolverError(f"feasibility LP failed: {res.message}")
    return True, lay.unpack(res.x)


def synchronous_baseline(scenario: Scenario, rates: RateTable) -> float:
    """Rate of conventional AF: every state used end to end, half the slot per hop."""
    return 0.5 * math.fsum(p * rates.rate(f) for f, p in scenario.support)


def check_sharing(scenario: Scenario, rates: RateTable, sh: TimeSharing, r: float,
                  tol: float = 1e-9) -> list[str]:
    """Violations of the supportability conditions by ``sh`` at throughput ``r``."""
    problems = []
    prob = dict(scenario.support)
    for (f, g), v in sh.a.items():
        if v < -tol:
            problems.append(f"a{list(f)}->{list(g)} negative")
        if v > tol and not membership_Is(f, g):
            problems.append(f"a{list(f)}->{list(g)} outside I_s")
    for (f, g), v in sh.b.items():
        if v < -tol:
            problems.append(f"b{list(f)}->{list(g)} negative")
        if v > tol and not membership_Id(f, g):
            problems.append(f"b{list(f)}->{list(g)} outside I_d")
    for f in prob:
        if sh.load(f) > 1 + tol:
            problems.append(f"state {list(f)} over-allocated: {sh.load(f)}")
    carried = math.fsum(prob[f] * v * rates.rate(g) for (f, g), v in sh.a.items())
    if abs(carried - r) > tol:
        problems.append(f"source flow {carried} != {r}")
    gs = {g for _, g in sh.a} | {g for _, g in sh.b}
    for g in gs:
        into = math.fsum(prob[f] * v for (f, gg), v in sh.a.items() if gg == g)
        out = math.fsum(prob[f] * v for (f, gg), v in sh.b.items() if gg == g)
        if abs(into - out) > tol:
            problems.append(f"queue {list(g)} unbalanced: {into} in, {out} out")
    return problems
