"""Time the compiled and pure-Python slot kernels on the same input.

    python3 benchmarks/bench_kernel.py [--slots N] [--repeat R]
"""

import argparse
import time

import numpy as np

from afrelay import kernel
from afrelay.region import solve_region_minform
from afrelay.scenario import ArrivalSpec, figure2_scenario
from afrelay.sim import SlotPlan, _streams, draw_arrivals, draw_fading, figure2_rates


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--slots", type=int, default=200_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)

    sc = figure2_scenario(0.5)
    rates = figure2_rates()
    lam = 0.9 * solve_region_minform(sc, rates).r_max
    fading_rng, arrival_rng = _streams(0)
    state_idx = draw_fading(sc, args.slots, fading_rng)
    arrivals = draw_arrivals(ArrivalSpec("bernoulli-batch", lam), args.slots, arrival_rng)
    plan = SlotPlan(rates, sc.states)

    timings = {}
    results = {}
    for name in sorted(kernel.BACKENDS):
        best = float("inf")
        for _ in range(args.repeat):
            t0 = time.perf_counter()
            results[name] = plan.run(state_idx, arrivals, every=args.slots // 1000 or 1, backend=name)
            best = min(best, time.perf_counter() - t0)
        timings[name] = best
        print(f"{name:>7}: {best:8.4f} s  ({args.slots / best:,.0f} slots/s)")

    if len(results) == 2:
        a, b = results["cython"], results["python"]
        same = a["q_s"] == b["q_s"] and a["delivered"] == b["delivered"] and np.array_equal(a["backlog"], b["backlog"])
        print(f"speedup: {timings['python'] / timings['cython']:.1f}x, identical output: {same}")
    else:
        print("compiled kernel not built; only the fallback was timed")


if __name__ == "__main__":
    main()
