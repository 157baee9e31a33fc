"""Command-line entry point: ``mabwlan generate|run|batch|report``.

Every scalar simulation setting has a matching ``--flag`` (underscores become
dashes). Values are resolved in the order defaults < ``--config`` file <
command-line flags.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
import time
from pathlib import Path

from . import config as cfgio
from .engine import MODES, ScenarioParams, SimConfig, generate_scenario, run, run_batch, toy_scenario
from .report import emit, read_batch_summary, write_batch_summary, write_report, write_summary

_LIST_FIELDS = {"fixed_aps", "forced_reconfigs", "mcs_table"}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_sim_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("simulation settings")
    for f in dataclasses.fields(SimConfig):
        if f.name in _LIST_FIELDS or f.name == "run_seed":
            continue
        if f.type in ("bool", bool):
            g.add_argument(_flag(f.name), action=argparse.BooleanOptionalAction, default=None)
        else:
            kind = int if f.type in ("int", int) else float
            g.add_argument(_flag(f.name), type=kind, default=None, metavar=f.name.upper())
    g.add_argument("--fixed-aps", type=int, nargs="*", default=None, metavar="AP",
                   help="APs whose channel agent stays off")
    g.add_argument("--forced-reconfig", type=float, nargs=3, action="append", default=None,
                   metavar=("TIME", "AP", "CHANNEL"), dest="forced_reconfigs",
                   help="unconditional channel change (repeatable)")
    g.add_argument("--run-seed", type=int, default=None, help="traffic/learning seed (default: scenario seed)")


def _add_scenario_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("deployment")
    g.add_argument("--n-aps", type=int, default=None)
    g.add_argument("--n-stations", type=int, default=None)
    g.add_argument("--area", type=float, nargs=3, default=None, metavar=("X", "Y", "Z"), dest="area_xyz")
    g.add_argument("--channels", type=int, nargs="+", default=None)
    g.add_argument("--seed", type=int, default=None)


def _mode_flag(p: argparse.ArgumentParser, default: str) -> None:
    p.add_argument("--mode", choices=("static", "adaptive", "both"), default=default)


def _modes(mode: str) -> tuple:
    return MODES if mode == "both" else (mode,)


def _resolve(args) -> tuple[SimConfig, ScenarioParams]:
    if getattr(args, "config", None):
        sim, params = cfgio.load_settings(args.config)
    else:
        sim, params = SimConfig(), ScenarioParams()
    sim_over = {}
    for f in dataclasses.fields(SimConfig):
        v = getattr(args, f.name, None)
        if v is None:
            continue
        if f.name == "forced_reconfigs":
            v = tuple((t, int(ap), int(ch)) for t, ap, ch in v)
        elif f.name == "fixed_aps":
            v = tuple(v)
        sim_over[f.name] = v
    par_over = {}
    for f in dataclasses.fields(ScenarioParams):
        v = getattr(args, f.name, None)
        if v is not None:
            par_over[f.name] = tuple(v) if isinstance(v, list) else v
    return dataclasses.replace(sim, **sim_over), dataclasses.replace(params, **par_over)


def _scenario(args, sim: SimConfig, params: ScenarioParams):
    if getattr(args, "scenario", None):
        return cfgio.load_scenario(args.scenario)
    if getattr(args, "toy", False):
        return toy_scenario(params.seed, config=sim)
    return generate_scenario(params.n_aps, params.n_stations, params.area_xyz, params.channels, params.seed, sim)


def cmd_generate(args) -> int:
    sim, params = _resolve(args)
    scenario = _scenario(args, sim, params)
    cfgio.save_scenario(args.out, scenario)
    print(f"wrote {args.out}: {scenario.n} APs, {scenario.m} stations, seed {scenario.seed}")
    return 0


def cmd_run(args) -> int:
    sim, params = _resolve(args)
    scenario = _scenario(args, sim, params)
    results = []
    for mode in _modes(args.mode):
        t0 = time.perf_counter()
        res = run(scenario, sim, mode)
        s = res.summary()
        print(f"{mode}: satisfaction {s['mean_satisfaction']:.4f}  throughput {s['agg_throughput_mbps']:.2f} Mb/s  "
              f"drop {s['drop_ratio']:.4f}  converged {s['convergence_time_s']}  "
              f"({time.perf_counter() - t0:.1f} s)")
        results.append(res)
    emit(results, args.out_dir, time_series=not args.no_time_series)
    cfgio.save_settings(Path(args.out_dir) / "settings.yaml", sim, params)
    return 0


def cmd_batch(args) -> int:
    sim, params = _resolve(args)
    t0 = time.perf_counter()
    batch = run_batch(params, args.n_scenarios, sim, _modes(args.mode), args.parallelism)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_batch_summary(batch.results, out / "batch_summary.csv")
    write_summary(batch.results, out / "summary.json")
    cfgio.save_settings(out / "settings.yaml", sim, params)
    print(f"{args.n_scenarios} scenario(s) x {len(_modes(args.mode))} mode(s) in "
          f"{time.perf_counter() - t0:.1f} s -> {out / 'batch_summary.csv'}")
    return 0


def cmd_report(args) -> int:
    src = Path(args.batch)
    if src.is_dir():
        src = src / "batch_summary.csv"
    rows = read_batch_summary(src)
    for path in write_report(rows, args.out_dir):
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mabwlan", description="Multi-armed bandit WLAN reconfiguration simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a scenario file")
    p.add_argument("--config", help="YAML settings file")
    p.add_argument("--toy", action="store_true", help="three-AP line fixture instead of a random deployment")
    p.add_argument("--out", required=True, help="scenario YAML to write")
    _add_scenario_flags(p)
    _add_sim_flags(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="simulate one scenario")
    p.add_argument("--config", help="YAML settings file")
    p.add_argument("--scenario", help="scenario YAML (default: generate from the deployment flags)")
    p.add_argument("--toy", action="store_true", help="use the three-AP line fixture")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--no-time-series", action="store_true", help="skip the per-node time series")
    _mode_flag(p, "both")
    _add_scenario_flags(p)
    _add_sim_flags(p)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("batch", help="paired static/adaptive runs over random scenarios")
    p.add_argument("--config", help="YAML settings file")
    p.add_argument("--n-scenarios", type=int, default=20)
    p.add_argument("--parallelism", type=int, default=1)
    p.add_argument("--out-dir", required=True)
    _mode_flag(p, "both")
    _add_scenario_flags(p)
    _add_sim_flags(p)
    p.set_defaults(func=cmd_batch)

    p = sub.add_parser("report", help="box statistics and convergence CDF from a batch")
    p.add_argument("--batch", required=True, help="batch directory or batch_summary.csv")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"mabwlan {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
