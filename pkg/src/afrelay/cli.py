"""Command-line entry point.

Scenario files are YAML documents::

    alphabet: [0, 1, 10]
    power: 1
    states:
      - {f: [1, 1, 10, 10], prob: 1.0}
    arrivals: {kind: bernoulli-batch, lambda: 0.25}      # optional
    sim: {horizon: 1000000, seeds: [0, 1, 2], checkpoints: 1000}   # optional
    solver: {tolerance: 1.0e-9}                          # optional

Every command writes CSV to stdout, or to ``<dir>/<name>.csv`` when ``--out``
or ``$AFRELAY_OUT_DIR`` names a directory.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from pathlib import Path

import yaml

from . import kernel
from .channel import FadingState, RateEntry, RateTable, _fmt, af_rate, build_rate_table
from .region import SolverError, solve_region_eqform, solve_region_minform, synchronous_baseline
from .scenario import ARRIVAL_KINDS, ArrivalSpec, Scenario, ScenarioError, SimSettings
from .sim import classify_stability, figure2, majority, run_trajectory, sweep_lambda

OUT_ENV = "AFRELAY_OUT_DIR"
EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 2, 3
BUNDLED = Path(__file__).with_name("scenarios")


class ScenarioFileError(ScenarioError):
    pass


# -- scenario files ---------------------------------------------------------

_SECTIONS = {
    "alphabet": True, "power": True, "states": True,
    "arrivals": False, "sim": False, "solver": False,
}
_SUBKEYS = {
    "arrivals": {"kind", "lambda", "bound"},
    "sim": {"horizon", "seeds", "checkpoints"},
    "solver": {"tolerance"},
    "state": {"f", "prob"},
}


def _line(node) -> int:
    return node.start_mark.line + 1


def _fail(path, node, msg):
    where = f"{path}:{_line(node)}" if node is not None else str(path)
    raise ScenarioFileError(f"{where}: {msg}")


def _mapping(path, node, what, allowed):
    if not isinstance(node, yaml.MappingNode):
        _fail(path, node, f"{what} must be a mapping")
    out = {}
    for k, v in node.value:
        key = k.value
        if key not in allowed:
            _fail(path, k, f"unknown key '{key}' in {what}")
        if key in out:
            _fail(path, k, f"duplicate key '{key}' in {what}")
        out[key] = v
    return out


def _scalar(path, node, key, kind=float):
    if not isinstance(node, yaml.ScalarNode):
        _fail(path, node, f"'{key}' must be a scalar")
    if kind is str:
        return node.value
    try:
        value = float(node.value)
    except ValueError:
        _fail(path, node, f"'{key}' must be a number, got {node.value!r}")
    if kind is int:
        if value != int(value):
            _fail(path, node, f"'{key}' must be an integer, got {node.value!r}")
        return int(value)
    return value


def _numbers(path, node, key, kind=float):
    if not isinstance(node, yaml.SequenceNode):
        _fail(path, node, f"'{key}' must be a list")
    return [_scalar(path, item, key, kind) for item in node.value]


def parse_scenario_text(text: str, path="<string>") -> Scenario:
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{path}:{mark.line + 1}" if mark else str(path)
        raise ScenarioFileError(f"{where}: malformed scenario file: {getattr(exc, 'problem', exc)}") from None
    if root is None:
        raise ScenarioFileError(f"{path}: empty scenario file")
    top = _mapping(path, root, "scenario", set(_SECTIONS))
    for key, required in _SECTIONS.items():
        if required and key not in top:
            raise ScenarioFileError(f"{path}: missing required key '{key}'")

    alphabet = _numbers(path, top["alphabet"], "alphabet")
    power = _scalar(path, top["power"], "power")
    states_node = top["states"]
    if not isinstance(states_node, yaml.SequenceNode):
        _fail(path, states_node, "'states' must be a list")
    fset = set(alphabet)
    support = []
    for item in states_node.value:
        entry = _mapping(path, item, "state", _SUBKEYS["state"])
        for key in ("f", "prob"):
            if key not in entry:
                _fail(path, item, f"state entry missing '{key}'")
        f = _numbers(path, entry["f"], "f")
        if len(f) != 4:
            _fail(path, entry["f"], f"'f' needs 4 gains, got {len(f)}")
        for v in f:
            if v not in fset:
                _fail(path, entry["f"], f"gain {v:g} not in alphabet {alphabet}")
        prob = _scalar(path, entry["prob"], "prob")
        if not prob > 0:
            _fail(path, entry["prob"], f"probability must be positive, got {prob}")
        support.append((FadingState(*f), prob))

    arrival = ArrivalSpec()
    if "arrivals" in top:
        a = _mapping(path, top["arrivals"], "arrivals", _SUBKEYS["arrivals"])
        kind = _scalar(path, a["kind"], "kind", str) if "kind" in a else arrival.kind
        if kind not in ARRIVAL_KINDS:
            _fail(path, a["kind"], f"arrival kind must be one of {ARRIVAL_KINDS}, got {kind!r}")
        lam = _scalar(path, a["lambda"], "lambda") if "lambda" in a else 0.0
        bound = _scalar(path, a["bound"], "bound") if "bound" in a else None
        try:
            arrival = ArrivalSpec(kind, lam, bound)
        except ValueError as exc:
            _fail(path, top["arrivals"], str(exc))

    sim = SimSettings()
    if "sim" in top:
        s = _mapping(path, top["sim"], "sim", _SUBKEYS["sim"])
        sim = SimSettings(
            horizon=_scalar(path, s["horizon"], "horizon", int) if "horizon" in s else sim.horizon,
            seeds=tuple(_numbers(path, s["seeds"], "seeds", int)) if "seeds" in s else sim.seeds,
            checkpoints=_scalar(path, s["checkpoints"], "checkpoints", int) if "checkpoints" in s else sim.checkpoints,
        )
        if sim.horizon <= 0 or sim.checkpoints <= 0:
            _fail(path, top["sim"], "horizon and checkpoints must be positive")

    tolerance = 1e-9
    if "solver" in top:
        s = _mapping(path, top["solver"], "solver", _SUBKEYS["solver"])
        if "tolerance" in s:
            tolerance = _scalar(path, s["tolerance"], "tolerance")
            if not tolerance > 0:
                _fail(path, s["tolerance"], "tolerance must be positive")

    try:
        return Scenario(tuple(alphabet), tuple(support), power, arrival, sim, tolerance)
    except ScenarioError as exc:
        node = states_node if "probabilit" in str(exc) else root
        _fail(path, node, str(exc))


def resolve_scenario_path(name: str) -> Path:
    p = Path(name)
    if p.exists():
        return p
    for candidate in (BUNDLED / name, BUNDLED / f"{name}.scn"):
        if candidate.exists():
            return candidate
    raise ScenarioFileError(f"{name}: no such scenario file")


def parse_scenario(path) -> Scenario:
    """Read and validate a scenario file; bundled names like ``figure2_gamma05`` also resolve."""
    p = resolve_scenario_path(str(path))
    try:
        text = p.read_text()
    except OSError as exc:
        raise ScenarioFileError(f"{p}: {exc.strerror}") from None
    return parse_scenario_text(text, p)


def serialize_scenario(sc: Scenario) -> str:
    doc = {
        "alphabet": list(sc.alphabet),
        "power": sc.power,
        "states": [{"f": list(f), "prob": p} for f, p in sc.support],
        "arrivals": {"kind": sc.arrival.kind, "lambda": sc.arrival.rate},
        "sim": {"horizon": sc.sim.horizon, "seeds": list(sc.sim.seeds), "checkpoints": sc.sim.checkpoints},
        "solver": {"tolerance": sc.tolerance},
    }
    if sc.arrival.bound is not None:
        doc["arrivals"]["bound"] = sc.arrival.bound
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)


# -- commands ---------------------------------------------------------------

def _emit(args, name: str, write) -> None:
    out_dir = args.out or os.environ.get(OUT_ENV)
    if out_dir and out_dir != "-":
        d = Path(out_dir)
        d.mkdir(parents=True, exist_ok=True)
        target = d / f"{name}.csv"
        with open(target, "w", newline="") as fh:
            write(fh)
        print(f"wrote {target}", file=sys.stderr)
    else:
        buf = io.StringIO()
        write(buf)
        sys.stdout.write(buf.getvalue())


def _tolerance(args, sc: Scenario | None = None) -> float:
    if args.tolerance is not None:
        return args.tolerance
    return sc.tolerance if sc is not None else 1e-9


def _rates_for(sc: Scenario, tol: float) -> RateTable:
    return build_rate_table(sc.alphabet, sc.power, tol)


def cmd_rate(args) -> int:
    sc = parse_scenario(args.scenario)
    tol = _tolerance(args, sc)
    if args.all:
        table = _rates_for(sc, tol)
    else:
        entries = []
        for f in sc.states:
            r, alloc = af_rate(f, sc.power, tol)
            entries.append(RateEntry(f, r, alloc))
        table = RateTable(entries, sc.power)
    _emit(args, "rates", table.write_csv)
    return EXIT_OK


def cmd_region(args) -> int:
    sc = parse_scenario(args.scenario)
    rates = _rates_for(sc, _tolerance(args, sc))
    forms = {"min": [solve_region_minform], "eq": [solve_region_eqform],
             "both": [solve_region_minform, solve_region_eqform]}[args.form]
    sols = [solve(sc, rates) for solve in forms]

    def write(fh):
        if args.fractions:
            for sol in sols:
                fh.write(f"# form={sol.form}\n")
                sol.write_csv(fh)
        else:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("form", "r_max"))
            for sol in sols:
                w.writerow((sol.form, _fmt(sol.r_max)))

    _emit(args, "region", write)
    return EXIT_OK


def cmd_baseline(args) -> int:
    sc = parse_scenario(args.scenario)
    rates = _rates_for(sc, _tolerance(args, sc))
    value = synchronous_baseline(sc, rates)

    def write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("r_sync",))
        w.writerow((_fmt(value),))

    _emit(args, "baseline", write)
    return EXIT_OK


def _arrival(args, sc: Scenario) -> ArrivalSpec:
    spec = sc.arrival
    if args.kind is not None:
        spec = ArrivalSpec(args.kind, spec.rate)
    if args.lam is not None:
        spec = spec.with_rate(args.lam)
    return spec


def cmd_simulate(args) -> int:
    sc = parse_scenario(args.scenario)
    rates = _rates_for(sc, _tolerance(args, sc))
    arrival = _arrival(args, sc)
    horizon = args.horizon or sc.sim.horizon
    seed = args.seed if args.seed is not None else sc.sim.seeds[0]
    stats = run_trajectory(sc, rates, arrival, horizon, seed, checkpoints=sc.sim.checkpoints,
                           strict=args.strict, event_log=args.event_log)
    verdict = classify_stability(stats, arrival.rate)

    def write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("lambda", "seed", "horizon", "arrived", "delivered", "delivered_rate",
                    "slope", "verdict", "final_q_s"))
        w.writerow((_fmt(arrival.rate), seed, horizon, _fmt(stats.arrived), _fmt(stats.delivered),
                    _fmt(stats.delivered_rate), _fmt(verdict.slope), verdict.verdict.value, _fmt(stats.q_s)))

    _emit(args, "simulate", write)
    if args.event_log:
        _emit(args, "trajectory", lambda fh: write_event_log(fh, stats))
    return EXIT_OK


def write_event_log(fh, stats) -> None:
    """One row per slot: state, action, queue touched, bits moved and queue diagnostics."""
    from .sim import action_name

    lg = stats.log
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(("slot", "f", "action", "g", "bits", "q_s", "weighted_backlog", "lyapunov"))
    for t in range(len(lg["kind"])):
        k = int(lg["k"][t])
        g = "" if k < 0 else " ".join(_fmt(v) for v in stats.queue_states[k])
        f = " ".join(_fmt(v) for v in stats.fading[lg["state"][t]])
        w.writerow((t, f, action_name(int(lg["kind"][t])), g, _fmt(lg["moved"][t]),
                    _fmt(lg["q_s"][t]), _fmt(lg["backlog"][t]), _fmt(lg["lyapunov"][t])))


def _parse_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def parse_grid(text: str) -> list[float]:
    """``start:stop:step`` (inclusive) or a comma-separated list."""
    if ":" not in text:
        return _parse_list(text)
    parts = [float(x) for x in text.split(":")]
    if len(parts) != 3 or parts[2] <= 0 or parts[1] < parts[0]:
        raise ValueError(f"grid must be start:stop:step with step > 0, got {text!r}")
    start, stop, step = parts
    n = int(round((stop - start) / step))
    if abs(start + n * step - stop) > 1e-9 * max(1.0, abs(stop)):
        raise ValueError(f"grid step {step} does not divide [{start}, {stop}]")
    return [round(start + i * step, 12) for i in range(n + 1)]


def cmd_sweep(args) -> int:
    sc = parse_scenario(args.scenario)
    rates = _rates_for(sc, _tolerance(args, sc))
    if args.fractions:
        r_max = solve_region_minform(sc, rates).r_max
        lambdas = [frac * r_max for frac in _parse_list(args.fractions)]
    elif args.lambdas:
        lambdas = _parse_list(args.lambdas)
    else:
        raise ValueError("sweep needs --lambdas or --fractions")
    seeds = _seeds(args, sc)
    rows = sweep_lambda(sc, rates, sorted(lambdas), args.horizon or sc.sim.horizon, seeds,
                        arrival_kind=args.kind, workers=args.workers, strict=args.strict)

    def write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("lambda", "seed", "slope", "delivered", "verdict"))
        for row in rows:
            w.writerow((_fmt(row.lam), row.seed, _fmt(row.slope), _fmt(row.delivered), row.verdict.value))

    _emit(args, "sweep", write)
    for lam, v in sorted(majority(rows).items()):
        print(f"lambda={_fmt(lam)} majority={v.value}", file=sys.stderr)
    return EXIT_OK


def _seeds(args, sc: Scenario) -> list[int]:
    if args.seeds:
        return [int(s) for s in args.seeds.split(",")]
    if args.seed is not None:
        return [args.seed + i for i in range(len(sc.sim.seeds))]
    return list(sc.sim.seeds)


def cmd_figure2(args) -> int:
    gammas = parse_grid(args.gammas)
    for g in gammas:
        if not 0.0 <= g <= 1.0:
            raise ValueError(f"gamma {g} outside [0, 1]")
    from .sim import figure2_rates

    rows = figure2(gammas, figure2_rates(_tolerance(args)))

    def write(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("gamma", "r_sync", "r_async", "r_max_lp"))
        for row in rows:
            w.writerow((_fmt(row.gamma), _fmt(row.r_sync), _fmt(row.r_async), _fmt(row.r_max_lp)))

    _emit(args, "figure2", write)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="base RNG seed")
    common.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or stdout)")
    common.add_argument("--tolerance", type=float, default=None, help="rate optimizer tolerance")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="afrelay", description=__doc__.split("\n")[0])
    p.add_argument("--version", action="version", version=f"%(prog)s 0.1.0 (kernel: {kernel.BACKEND})")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("rate", parents=[common], help="AF rates per fading state")
    s.add_argument("scenario")
    s.add_argument("--all", action="store_true", help="every state of alphabet^4, not just the support")
    s.set_defaults(func=cmd_rate)

    s = sub.add_parser("region", parents=[common], help="maximum supportable rate r_max")
    s.add_argument("scenario")
    s.add_argument("--form", choices=("min", "eq", "both"), default="min")
    s.add_argument("--fractions", action="store_true", help="also list non-zero time-sharing fractions")
    s.set_defaults(func=cmd_region)

    s = sub.add_parser("baseline", parents=[common], help="synchronous AF rate")
    s.add_argument("scenario")
    s.set_defaults(func=cmd_baseline)

    sim_opts = argparse.ArgumentParser(add_help=False)
    sim_opts.add_argument("--horizon", type=int, default=None)
    sim_opts.add_argument("--kind", choices=ARRIVAL_KINDS, default=None)
    sim_opts.add_argument("--strict", action="store_true", help="idle instead of sending padded packets")

    s = sub.add_parser("simulate", parents=[common, sim_opts], help="run one trajectory")
    s.add_argument("scenario")
    s.add_argument("--lambda", dest="lam", type=float, default=None)
    s.add_argument("--event-log", action="store_true", help="also write trajectory.csv")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("sweep", parents=[common, sim_opts], help="classify stability over a lambda grid")
    s.add_argument("scenario")
    s.add_argument("--lambdas", default=None, help="comma-separated arrival rates")
    s.add_argument("--fractions", default=None, help="comma-separated multiples of r_max")
    s.add_argument("--seeds", default=None, help="comma-separated seeds")
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("figure2", parents=[common], help="synchronous vs asynchronous rates over outage probability")
    s.add_argument("--gammas", default="0:1:0.1")
    s.set_defaults(func=cmd_figure2)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, ValueError) as exc:
        print(f"afrelay: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SolverError, RuntimeError, OSError) as exc:
        print(f"afrelay: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
