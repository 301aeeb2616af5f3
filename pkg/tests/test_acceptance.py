"""Exit criteria, each at its pinned tolerance and time budget."""

import time

import numpy as np
import pytest

from afrelay.channel import FadingState, af_objective, af_rate, build_rate_table
from afrelay.region import solve_region_eqform, solve_region_minform, synchronous_baseline
from afrelay.scenario import FIGURE2_ALPHABET, ArrivalSpec, Scenario, figure2_closed_forms, figure2_scenario
from afrelay.scheduler import ActionKind
from afrelay.sim import classify_stability, run_trajectory, step_trajectory
from afrelay.region import membership_Id, membership_Is
from oracles import c20_11, exhaustive_region, grid_af_rate, random_scenario_parts

C = c20_11()
GAMMAS = [round(0.1 * i, 10) for i in range(11)]
SEEDS = (0, 1, 2)
HORIZON = 1_000_000


@pytest.fixture(scope="module")
def rates():
    return build_rate_table(FIGURE2_ALPHABET, 1.0)


@pytest.fixture(scope="module")
def r_max(rates):
    return solve_region_minform(figure2_scenario(0.5), rates).r_max


@pytest.mark.acceptance(1, "af_rate([1,1,10,10], P=1) = 0.5*log2(31/11) within 1e-6, < 1 s")
def test_c1_rate_formula():
    t0 = time.perf_counter()
    rate, _ = af_rate([1, 1, 10, 10], 1.0)
    elapsed = time.perf_counter() - t0
    assert abs(rate - 0.5 * np.log2(31 / 11)) <= 1e-6
    assert elapsed < 1.0


@pytest.mark.acceptance(2, "figure-2 family: LP within 1e-8, baseline within 1e-12 of closed forms, < 10 s")
def test_c2_figure2_reproduction():
    t0 = time.perf_counter()
    rates = build_rate_table(FIGURE2_ALPHABET, 1.0)
    for gamma in GAMMAS:
        sc = figure2_scenario(gamma)
        r_sync, r_async = figure2_closed_forms(gamma)
        assert abs(solve_region_minform(sc, rates).r_max - r_async) <= 1e-8, gamma
        assert abs(synchronous_baseline(sc, rates) - r_sync) <= 1e-12, gamma
    assert time.perf_counter() - t0 < 10.0


@pytest.mark.acceptance(3, "min-form and equality-form LPs agree within 1e-8 on 50 random scenarios, < 2 min")
def test_c3_lp_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(50):
        alphabet, support = random_scenario_parts(rng, max_alphabet=3)
        sc = Scenario(tuple(alphabet), tuple((FadingState(*f), p) for f, p in support), float(rng.uniform(0.2, 4.0)))
        rates = build_rate_table(sc.alphabet, sc.power)
        worst = max(worst, abs(solve_region_minform(sc, rates).r_max - solve_region_eqform(sc, rates).r_max))
    assert worst <= 1e-8
    assert time.perf_counter() - t0 < 120.0


def _run(rates, lam, seed):
    t0 = time.perf_counter()
    stats = run_trajectory(figure2_scenario(0.5), rates, ArrivalSpec("bernoulli-batch", lam), HORIZON, seed)
    return stats, time.perf_counter() - t0


@pytest.mark.acceptance(4, "gamma=0.5, lambda=0.9*r_max, 1e6 slots: every seed stable, < 1 min/seed")
@pytest.mark.parametrize("seed", SEEDS)
def test_c4_stable_side(rates, r_max, seed):
    lam = 0.9 * r_max
    stats, elapsed = _run(rates, lam, seed)
    v = classify_stability(stats, lam)
    assert v.slope < 0.05 * lam
    assert v.delivered_rate >= 0.95 * lam
    assert v.stable
    assert elapsed < 60.0


@pytest.mark.acceptance(5, "gamma=0.5, lambda=1.1*r_max, 1e6 slots: every seed unstable, slope >= 0.05*lambda")
@pytest.mark.parametrize("seed", SEEDS)
def test_c5_unstable_side(rates, r_max, seed):
    lam = 1.1 * r_max
    stats, elapsed = _run(rates, lam, seed)
    v = classify_stability(stats, lam)
    assert v.slope >= 0.05 * lam
    assert not v.stable
    assert elapsed < 60.0


@pytest.mark.acceptance(6, "symmetry, conservation, eligibility per slot; optimizer consistency and full-power allocation")
def test_c6_properties(rates, r_max):
    sc = figure2_scenario(0.5)
    for lam in (0.5 * r_max, 0.9 * r_max, 1.1 * r_max):
        for seed in (0, 1):
            for f, action, q in step_trajectory(sc, rates, ArrivalSpec("bernoulli-batch", lam), 5000, seed):
                if action.kind is ActionKind.SOURCE:
                    assert membership_Is(f, action.g)
                elif action.kind is ActionKind.RELAY:
                    assert membership_Id(f, action.g)
                for g in q.virtual_states():
                    assert q.count(1, g) == q.count(2, g)
                    assert q.enqueued.get(g, 0) - q.drained.get(g, 0) == q.count(1, g)
    assert len(rates) == 81
    for e in rates:
        assert abs(af_objective(e.state, e.alloc) - e.rate) <= 1e-9
    for e in rates.positive():
        assert e.alloc.p_s == 1.0
        assert max(e.alloc.p_1, e.alloc.p_2) >= 1.0 - 1.0 / 50


@pytest.mark.acceptance(7, "af_rate vs P/200 grid (1e-4, 20 states); r_max vs 1e-3 exhaustive search (1e-3)")
def test_c7_oracles(rates):
    rng = np.random.default_rng(77)
    for _ in range(20):
        g = FadingState(*rng.choice([0.0, 0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0], 4))
        P = float(rng.choice([0.5, 1.0, 2.0, 5.0]))
        assert abs(af_rate(g, P)[0] - grid_af_rate(g, P, 200)) <= 1e-4, (g, P)
    support = [((1.0, 1.0, 0.0, 0.0), 0.35), ((1.0, 1.0, 10.0, 10.0), 0.65)]
    sc = Scenario(FIGURE2_ALPHABET, tuple((FadingState(*f), p) for f, p in support), 1.0)
    oracle = exhaustive_region(support, {tuple(e.state): e.rate for e in rates}, step=1e-3)
    assert abs(solve_region_minform(sc, rates).r_max - oracle) <= 1e-3
