import os
import subprocess
import sys

import numpy as np
import pytest

from afrelay import kernel
from afrelay.channel import FadingState, build_rate_table
from afrelay.scenario import ArrivalSpec, Scenario, figure2_scenario
from afrelay.scheduler import ActionKind
from afrelay.sim import SlotPlan, run_trajectory, step_trajectory

needs_cython = pytest.mark.skipif("cython" not in kernel.BACKENDS, reason="compiled kernel not built")


def _scenarios(fig2_rates):
    mixed = Scenario(
        (0, 1, 10),
        (
            (FadingState(1, 1, 1, 10), 0.2),
            (FadingState(1, 0, 10, 10), 0.3),
            (FadingState(0, 1, 0, 1), 0.1),
            (FadingState(1, 1, 10, 0), 0.4),
        ),
        1.0,
    )
    return [(figure2_scenario(0.5), fig2_rates), (figure2_scenario(0.2), fig2_rates), (mixed, fig2_rates)]


@needs_cython
@pytest.mark.parametrize("strict", [False, True])
@pytest.mark.parametrize("kind", ["bernoulli-batch", "uniform", "constant"])
def test_backends_bit_identical(fig2_rates, strict, kind):
    for sc, rates in _scenarios(fig2_rates):
        for lam in (0.1, 0.3, 0.6):
            arrival = ArrivalSpec(kind, lam)
            a = run_trajectory(sc, rates, arrival, 5000, seed=3, strict=strict, event_log=True, backend="cython")
            b = run_trajectory(sc, rates, arrival, 5000, seed=3, strict=strict, event_log=True, backend="python")
            assert a.delivered == b.delivered and a.q_s == b.q_s
            assert np.array_equal(a.backlog, b.backlog)
            assert a.queues == b.queues and a.enqueued == b.enqueued and a.actions == b.actions
            for key in a.log:
                assert np.array_equal(a.log[key], b.log[key]), key


@pytest.mark.parametrize("backend", sorted(kernel.BACKENDS))
@pytest.mark.parametrize("strict", [False, True])
def test_kernel_matches_reference_scheduler(fig2_rates, backend, strict):
    for sc, rates in _scenarios(fig2_rates):
        arrival = ArrivalSpec("bernoulli-batch", 0.3)
        stats = run_trajectory(sc, rates, arrival, 3000, seed=9, strict=strict, event_log=True, backend=backend)
        lg = stats.log
        for t, (f, action, q) in enumerate(step_trajectory(sc, rates, arrival, 3000, seed=9, strict=strict)):
            assert sc.states[lg["state"][t]] == f
            assert lg["q_s"][t] == q.q_s
            kind = action.kind
            if kind is ActionKind.SOURCE and q.last_moved == 0.0:
                # a source action moves 0 bits only when strict mode skipped it
                assert strict
                kind = ActionKind.IDLE
            assert int(lg["kind"][t]) == int(kind)
            if kind is not ActionKind.IDLE:
                assert stats.queue_states[lg["k"][t]] == action.g
            assert lg["moved"][t] == q.last_moved
        assert stats.delivered == q.delivered
        assert stats.queues == {g: q.count(1, g) for g in q.virtual_states() if q.count(1, g)}


def test_kernel_conservation_long_run(fig2_rates):
    stats = run_trajectory(figure2_scenario(0.5), fig2_rates, ArrivalSpec("bernoulli-batch", 0.31), 200_000, seed=1)
    for g in stats.enqueued:
        assert stats.enqueued[g] - stats.drained.get(g, 0) == stats.queues.get(g, 0)
    assert sum(stats.actions.values()) == stats.horizon
    assert stats.delivered <= stats.arrived


def test_zero_horizon_plan(fig2_rates):
    plan = SlotPlan(fig2_rates, figure2_scenario(0.5).states)
    out = plan.run(np.zeros(0, dtype=np.int64), np.zeros(0), every=0)
    assert out["delivered"] == 0.0 and len(out["backlog"]) == 0


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernel.get_backend("fortran")


def test_env_forces_pure_python():
    env = dict(os.environ, AFRELAY_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import afrelay.kernel as k; print(k.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


@needs_cython
def test_compiled_backend_is_default():
    if os.environ.get("AFRELAY_PURE_PYTHON"):
        pytest.skip("fallback forced by environment")
    assert kernel.BACKEND == "cython"
