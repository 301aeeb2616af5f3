import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from afrelay.channel import (
    GUARD_STEPS,
    FadingState,
    RateTable,
    af_objective,
    af_rate,
    build_rate_table,
    capacity,
)
from oracles import c20_11, grid_af_rate, single_relay_rate

C = c20_11()


@pytest.mark.parametrize("x, expected", [(0.0, 0.0), (1.0, 0.5), (20 / 11, 0.5 * math.log2(31 / 11))])
def test_capacity_values(x, expected):
    assert capacity(x) == pytest.approx(expected, abs=1e-15)


def test_capacity_rejects_negative():
    with pytest.raises(ValueError):
        capacity(-0.1)


@given(st.floats(0, 1e6), st.floats(1e-9, 1e3))
def test_capacity_strictly_increasing(x, dx):
    assert capacity(x + dx) > capacity(x) or dx < 1e-12 * max(x, 1)


def test_objective_paper_example():
    # c_1 = c_2 = 5 at unit powers, numerator 20, denominator 11
    assert af_objective([1, 1, 10, 10], (1, 1, 1)) == pytest.approx(C, abs=1e-15)


def test_objective_zero_gains():
    assert af_objective([0, 0, 0, 0], (0.3, 0.7, 1.0)) == 0.0


def test_objective_single_relay():
    assert af_objective([1, 0, 10, 0], (1, 1, 0)) == pytest.approx(capacity(5 / 6), abs=1e-15)


def test_rate_paper_example():
    rate, alloc = af_rate([1, 1, 10, 10], 1.0)
    assert rate == pytest.approx(C, abs=1e-9)
    assert alloc == pytest.approx((1.0, 1.0, 1.0), abs=1e-6)


@pytest.mark.parametrize("g_1d, g_2d", [(0, 0), (1, 10), (10, 10)])
@pytest.mark.parametrize("P", [0.5, 1.0, 7.0])
def test_rate_zero_without_source_link(g_1d, g_2d, P):
    assert af_rate([0, 0, g_1d, g_2d], P)[0] == 0.0


def test_rate_zero_without_relay_link():
    assert af_rate([1, 10, 0, 0], 1.0)[0] == 0.0


def test_rate_single_relay_matches_grid():
    rate, alloc = af_rate([1, 0, 10, 0], 1.0)
    assert rate == pytest.approx(capacity(5 / 6), abs=1e-9)
    assert rate == pytest.approx(grid_af_rate([1, 0, 10, 0], 1.0), abs=1e-9)
    assert alloc.p_s == 1.0 and alloc.p_1 == 1.0


def test_rate_rejects_bad_power():
    with pytest.raises(ValueError):
        af_rate([1, 1, 1, 1], 0.0)


def test_table_single_zero_state():
    t = build_rate_table([0], 1.0)
    assert len(t) == 1
    assert t.rate([0, 0, 0, 0]) == 0.0


def test_table_figure2_alphabet(fig2_rates):
    assert len(fig2_rates) == 81
    assert fig2_rates.rate([1, 1, 10, 10]) == pytest.approx(C, abs=1e-9)
    keys = [tuple(s) for s in fig2_rates.states()]
    assert keys == sorted(keys)


def test_table_unit_alphabet_against_grid():
    t = build_rate_table([1], 1.0)
    assert len(t) == 1
    assert t.rate([1, 1, 1, 1]) == pytest.approx(grid_af_rate([1, 1, 1, 1], 1.0), abs=1e-4)
    assert t.rate([1, 1, 1, 1]) >= grid_af_rate([1, 1, 1, 1], 1.0) - 1e-12


def test_table_empty_alphabet():
    with pytest.raises(ValueError):
        build_rate_table([], 1.0)


def test_table_csv_roundtrip(fig2_rates):
    buf = io.StringIO()
    fig2_rates.write_csv(buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "g_s1,g_s2,g_1d,g_2d,rate,p_s,p_1,p_2"
    assert len(lines) == 82
    back = RateTable.read_csv(io.StringIO(buf.getvalue()), 1.0)
    for e in fig2_rates:
        assert back.rate(e.state) == pytest.approx(e.rate, rel=1e-11, abs=1e-12)


def test_optimizer_consistency(fig2_rates):
    for e in fig2_rates:
        assert af_objective(e.state, e.alloc) == pytest.approx(e.rate, abs=1e-9)


def test_remark2_allocation(fig2_rates):
    step = 1.0 / GUARD_STEPS
    for e in fig2_rates.positive():
        assert e.alloc.p_s == 1.0
        assert max(e.alloc.p_1, e.alloc.p_2) >= 1.0 - step


gains = st.sampled_from([0.0, 0.2, 1.0, 3.0, 10.0])


@settings(max_examples=30, deadline=None)
@given(st.tuples(gains, gains, gains, gains), st.integers(0, 3), st.floats(0.1, 5.0), st.floats(1.0, 3.0))
def test_rate_monotone_in_gain(g, idx, delta, P):
    lo, _ = af_rate(g, P)
    g2 = list(g)
    g2[idx] += delta
    hi, _ = af_rate(g2, P)
    assert hi >= lo - 1e-9


@settings(max_examples=30, deadline=None)
@given(st.tuples(gains, gains, gains, gains), st.floats(0.1, 5.0), st.floats(1.01, 3.0))
def test_rate_monotone_in_power(g, P, factor):
    assert af_rate(g, P * factor)[0] >= af_rate(g, P)[0] - 1e-9


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 20.0), st.floats(0.05, 20.0), st.floats(0.2, 4.0))
def test_single_relay_reduction(g_s1, g_1d, P):
    rate, _ = af_rate([g_s1, 0.0, g_1d, 0.0], P)
    assert rate == pytest.approx(single_relay_rate(g_s1, g_1d, P), abs=1e-6)
    assert rate >= single_relay_rate(g_s1, g_1d, P) - 1e-12


def test_rate_against_grid_random_states():
    rng = np.random.default_rng(7)
    for _ in range(5):
        g = FadingState(*rng.choice([0.0, 0.3, 1.0, 2.0, 10.0, 30.0], 4))
        P = float(rng.choice([0.5, 1.0, 2.0]))
        rate, _ = af_rate(g, P)
        oracle = grid_af_rate(g, P)
        assert rate == pytest.approx(oracle, abs=1e-4)
        assert rate >= oracle - 1e-12
