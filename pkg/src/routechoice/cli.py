"""Command-line interface.

Subcommands: gen-net, gen-paths, gen-population, run, summarize, charts.
Everything takes --out; exit code 0 on success, 1 with a one-line
``error: <message>`` on stderr otherwise.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import ScenarioConfig, load_config_file, serialize_config
from .net import (
    generate_route_sets,
    grid_network,
    load_network_file,
    save_network_file,
    save_route_set_file,
)
from .reporting import (
    emit_charts,
    export_run,
    load_run,
    summarize_loaded,
    write_manifest,
)
from .runner import population_to_csv, run_scenario, sample_driver_specs


def _split_nodes(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def cmd_gen_net(args) -> None:
    net = grid_network(
        rows=args.rows,
        cols=args.cols,
        edge_length=args.edge_length,
        speed_range=(args.speed_min, args.speed_max),
        capacity=args.capacity,
        seed=args.seed,
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "network.csv"
    save_network_file(net, path)
    print(f"wrote {path} ({len(net.nodes)} nodes, {len(net.edges)} edges)")


def cmd_gen_paths(args) -> None:
    net = load_network_file(args.net)
    ods = [(o, d) for o in _split_nodes(args.origins) for d in _split_nodes(args.destinations)]
    routes = generate_route_sets(net, ods, beta=args.beta, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "routes.csv"
    save_route_set_file(routes, path)
    print(f"wrote {path} ({len(ods)} ODs x 3 routes)")


def cmd_gen_population(args) -> None:
    cfg = _load_config(args.config)
    if args.drivers is not None:
        cfg.demand.n_drivers = args.drivers
    if args.avs is not None:
        cfg.demand.n_avs = args.avs
    cfg.validate()
    specs = sample_driver_specs(cfg, np.random.default_rng(args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "population.csv"
    path.write_text(population_to_csv(specs), encoding="utf-8", newline="\n")
    print(f"wrote {path} ({len(specs)} drivers, {sum(s.mutates_to_av for s in specs)} future AVs)")


def _load_config(path: str | None) -> ScenarioConfig:
    if path is None:
        return ScenarioConfig()
    return load_config_file(path)


def cmd_run(args) -> None:
    cfg = _load_config(args.config)
    if args.behavior is not None:
        cfg.avs.behavior = args.behavior
    if args.seed is not None:
        cfg.run.master_seed = args.seed
    if args.reps is not None:
        cfg.run.repetitions = args.reps
    cfg.validate()
    out = Path(args.out)
    write_manifest(cfg, out)

    def progress(i: int) -> None:
        print(f"repetition {i} finished")

    result = run_scenario(cfg, progress=progress)
    export_run(result, out)
    print(f"wrote {out}/manifest.yaml and {cfg.run.repetitions} repetition director{'y' if cfg.run.repetitions == 1 else 'ies'}")


def cmd_summarize(args) -> None:
    run = load_run(args.run)
    table = summarize_loaded(run, window=args.window)
    out = Path(args.out) if args.out else Path(args.run)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "summary.csv"
    path.write_text(table.to_csv(), encoding="utf-8", newline="\n")
    print(table.to_csv(), end="")
    print(f"wrote {path}")


def cmd_charts(args) -> None:
    run = load_run(args.run)
    out = Path(args.out) if args.out else Path(args.run) / "charts"
    paths = emit_charts(run.reps, out, smooth_width=args.smooth)
    for p in paths:
        print(f"wrote {p}")


def cmd_show_config(args) -> None:
    print(serialize_config(_load_config(args.config)), end="")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="routechoice",
        description="Day-to-day route choice simulation with humans and deep-Q AVs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-net", help="generate a synthetic grid network")
    p.add_argument("--rows", type=int, default=4)
    p.add_argument("--cols", type=int, default=4)
    p.add_argument("--edge-length", type=float, default=300.0)
    p.add_argument("--speed-min", type=float, default=8.0)
    p.add_argument("--speed-max", type=float, default=14.0)
    p.add_argument("--capacity", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_net)

    p = sub.add_parser("gen-paths", help="generate fixed route sets for ODs")
    p.add_argument("--net", required=True, help="edge-list network file")
    p.add_argument("--origins", required=True, help="comma-separated origin nodes")
    p.add_argument("--destinations", required=True, help="comma-separated destination nodes")
    p.add_argument("--beta", type=float, default=-0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_paths)

    p = sub.add_parser("gen-population", help="generate a driver population file")
    p.add_argument("--config", default=None)
    p.add_argument("--drivers", type=int, default=None)
    p.add_argument("--avs", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_population)

    p = sub.add_parser("run", help="run a scenario and export records")
    p.add_argument("--config", default=None, help="YAML config (defaults when omitted)")
    p.add_argument("--behavior", default=None, help="override avs.behavior")
    p.add_argument("--seed", type=int, default=None, help="override run.master_seed")
    p.add_argument("--reps", type=int, default=None, help="override run.repetitions")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("summarize", help="settle-vs-adapt percent changes")
    p.add_argument("--run", required=True, help="directory written by `run`")
    p.add_argument("--window", type=int, default=100)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_summarize)

    p = sub.add_parser("charts", help="render SVG charts from a run directory")
    p.add_argument("--run", required=True)
    p.add_argument("--smooth", type=int, default=50)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_charts)

    p = sub.add_parser("show-config", help="print the effective config")
    p.add_argument("--config", default=None)
    p.set_defaults(func=cmd_show_config)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
