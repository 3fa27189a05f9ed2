"""Command-line entry points: simulate, validate, oracle."""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .harness import (
    ConfigError,
    RunDirectoryError,
    apply_desk_scale,
    enumerate_points,
    load_config,
    resolved_config,
    run_sweep,
)
from .oracles import format_report, run_all


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coprop",
        description="Quantum-classical WDM co-propagation simulator",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the sweep described by a JSON config")
    sim.add_argument("config", help="path to the JSON run configuration")
    sim.add_argument("--seed", type=int, default=None, help="override master_seed")
    sim.add_argument("--out", default=None, help="override output_dir")
    sim.add_argument("--workers", type=int, default=None, help="override worker count")
    sim.add_argument(
        "--desk-scale", action="store_true",
        help="clip to +-6 channels around the quantum channel and 16 trajectories")
    sim.add_argument(
        "--force", action="store_true",
        help="overwrite an output directory left by a different configuration")

    val = sub.add_parser("validate", help="check a config and print the resolved run")
    val.add_argument("config", help="path to the JSON run configuration")

    orc = sub.add_parser("oracle", help="run the built-in cross-validation suite")
    orc.add_argument("--quick", action="store_true", help="coarser, faster variant")
    return parser


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg.master_seed = args.seed
    if args.workers is not None:
        cfg.workers = args.workers
    if args.desk_scale:
        cfg = apply_desk_scale(cfg)
    out_dir = args.out if args.out is not None else cfg.output_dir
    result = run_sweep(cfg, out_dir=out_dir, force=args.force)
    failed = [r for r in result.rows if r.error]
    for row in result.rows:
        if row.error:
            print(f"  x={row.x:g} [{row.label or 'results'}] ERROR {row.error}")
        else:
            print(
                f"  x={row.x:g} [{row.label or 'results'}] "
                f"C={row.c:.6g} +- {row.c_stderr:.2g}"
            )
    print(f"{len(result.rows)} rows -> {result.out_dir}")
    return 1 if failed else 0


def _cmd_validate(args) -> int:
    cfg = load_config(args.config)
    points = enumerate_points(cfg)
    print(json.dumps(resolved_config(cfg), indent=2, sort_keys=True))
    print(f"valid: {cfg.sweep.mode} sweep, {len(points)} points, "
          f"{cfg.ensemble_size} trajectories each", file=sys.stderr)
    return 0


def _cmd_oracle(args) -> int:
    results = run_all(quick=args.quick)
    print(format_report(results))
    return 0 if all(r.passed for r in results) else 1


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
    except (ConfigError, RunDirectoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    parser.error(f"unknown command {args.command!r}")
    return 2


if __name__ == "__main__":
    sys.exit(main())
