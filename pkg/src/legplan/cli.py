"""Command line interface of the benchmark harness."""

from __future__ import annotations

import argparse
import math
import sys

from . import bench


def _split(value: str, universe, name: str):
    if value == "all":
        return tuple(universe)
    items = tuple(value.split(","))
    for item in items:
        if item not in universe:
            raise argparse.ArgumentTypeError(
                f"unknown {name} {item!r}; choose from {', '.join(universe)} or all"
            )
    return items


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bench",
        description="Benchmark full-body planners for walking robots.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a benchmark sweep")
    run.add_argument(
        "--scenario", default="all",
        help="flat|rough|box|bugtrap|all (comma-separated allowed)",
    )
    run.add_argument(
        "--robot", default="hexapod",
        help="hexapod|quadruped|all (comma-separated allowed)",
    )
    run.add_argument(
        "--planner", default="all",
        help="rrtconnect|guidedrrt|rrtstarconnect|irrtstarconnect|igrsc|all",
    )
    run.add_argument("--trials", type=int, default=10)
    run.add_argument("--seed", type=int, default=42)
    run.add_argument("--opt-time", type=float, default=10.0)
    run.add_argument("--time-limit", type=float, default=60.0)
    run.add_argument("--entrance-width", type=float, default=1.2)
    run.add_argument("--out", required=True, help="output directory")

    scene = sub.add_parser("export-scene", help="render a map (and path) to SVG")
    scene.add_argument("--map", required=True, help="ELEVMAP file")
    scene.add_argument("--path", default=None, help="optional LEGPATH file")
    scene.add_argument("--out", required=True, help="output SVG file")
    return parser


def _cmd_run(args) -> int:
    cfg = bench.BenchConfig(
        scenarios=_split(args.scenario, bench.SCENARIOS, "scenario"),
        robots=_split(args.robot, bench.ROBOTS, "robot"),
        planners=_split(args.planner, bench.PLANNERS, "planner"),
        trials=args.trials,
        seed=args.seed,
        opt_time=args.opt_time,
        time_limit=args.time_limit,
        entrance_width=args.entrance_width,
        out_dir=args.out,
    )
    _, summaries = bench.run_benchmark(cfg)
    hdr = "%-8s %-9s %-16s %5s %6s %9s %9s" % (
        "scenario", "robot", "planner", "succ", "trials", "time[s]", "len[m]",
    )
    print(hdr)
    for s in summaries:
        print(
            "%-8s %-9s %-16s %5.2f %6d %9s %9s"
            % (
                s.scenario, s.robot, s.planner, s.success_rate, s.trials,
                "-" if math.isnan(s.mean_time) else "%.2f" % s.mean_time,
                "-" if math.isnan(s.mean_length) else "%.3f" % s.mean_length,
            )
        )
    print(f"results written to {args.out}")
    return 0


def _cmd_export_scene(args) -> int:
    from .terrain import load_map

    with open(args.map, "rb") as f:
        emap = load_map(f.read())
    path_states = None
    if args.path:
        with open(args.path) as f:
            _, path_states = bench.load_path(f.read())
    bench.export_scene(emap, path=path_states, out=args.out)
    print(f"scene written to {args.out}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_export_scene(args)


if __name__ == "__main__":
    sys.exit(main())
