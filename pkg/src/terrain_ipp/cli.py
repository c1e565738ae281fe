"""Command-line entry point: ``terrain-ipp run CONFIG``."""

from __future__ import annotations

import argparse
import sys

from .experiment import ConfigError, run_experiment


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="terrain-ipp", description="Run informative path planning experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run every trial declared in a TOML config")
    run.add_argument("config", help="path to the experiment TOML file")
    run.add_argument("-o", "--out", default="results", help="output directory (default: %(default)s)")
    run.add_argument("--seed", type=int, help="override experiment.seed")
    run.add_argument("--trials", type=int, help="override experiment.trials")
    run.add_argument("-j", "--workers", type=int, help="parallel worker processes (overrides experiment.workers)")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        result = run_experiment(args.config, args.out, seed=args.seed, workers=args.workers, trials=args.trials)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"terrain-ipp: error: {exc}", file=sys.stderr)
        return 2
    n_ok, n_bad = len(result.runs), len(result.failures)
    print(f"{n_ok} trial(s) completed, {n_bad} failed; outputs in {result.out_dir}")
    for (planner, trial), err in sorted(result.failures.items()):
        print(f"  {planner} trial {trial}: {err}", file=sys.stderr)
    return 0 if n_bad == 0 else 1


if __name__ == "__main__":
    sys.exit(main())
