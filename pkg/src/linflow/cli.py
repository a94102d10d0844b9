"""Command-line entry point: ``linflow run`` and ``linflow compare``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from linflow.config import OUTPUT_ROOT_ENV, load_config
from linflow.errors import ConfigError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linflow",
        description="Run and compare linear-representation solvers for nonlinear ODEs.",
        epilog=f"Relative output directories are resolved under ${OUTPUT_ROOT_ENV} when set.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment from a JSON config")
    run.add_argument("config", type=Path)
    run.add_argument("--output", type=Path, default=None,
                     help="override the config's output_dir")
    run.add_argument("--figures", action="store_true",
                     help="also render PNG figures next to the CSV output")

    cmp_ = sub.add_parser("compare", help="compare run directories against a reference run")
    cmp_.add_argument("runs", nargs="+", type=Path)
    cmp_.add_argument("--reference", required=True, type=Path)
    cmp_.add_argument("--threshold", required=True, type=float)
    cmp_.add_argument("--out", type=Path, default=Path("comparison.csv"),
                      help="where to write the comparison CSV")
    cmp_.add_argument("--figures", action="store_true",
                      help="also render an overlay plot next to the CSV")
    return parser


def _cmd_run(args) -> int:
    from linflow.runner import run_experiment

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    result = run_experiment(cfg, args.output, figures=args.figures)
    if not result.ok:
        print(f"{cfg.name}: {result.error}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"{cfg.name}: wrote {result.output_dir}")
    return EXIT_OK


def _cmd_compare(args) -> int:
    from linflow.runner import compare_runs

    for d in [args.reference, *args.runs]:
        if not (d / "summary.csv").exists():
            print(f"config error: {d} has no summary.csv", file=sys.stderr)
            return EXIT_CONFIG
    try:
        report = compare_runs(args.runs, args.reference, args.threshold)
    except ValueError as exc:
        print(f"incompatible runs: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    report.to_csv(args.out)
    print(report.table())
    if args.figures:
        from linflow.plotting import render_comparison

        render_comparison(report, args.runs, args.reference, args.out.with_suffix(".png"))
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_compare(args)


if __name__ == "__main__":
    raise SystemExit(main())
