"""Command-line entry point: train, prime, aggregate, plot-data, selftest."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .aggregate import DEFAULT_BOOTSTRAP, aggregate, export_plot_data, save_report
from .config import load_config, override
from .errors import ConfigError
from .harness import run_priming, run_training
from .selftest import run_selftest

USAGE_ERROR = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ofnlab",
        description="Desk-scale actor-critic experiments on Q-value divergence "
                    "under high update-to-data ratios.")
    sub = parser.add_subparsers(dest="command", required=True)

    for mode in ("train", "prime"):
        p = sub.add_parser(mode, help=f"run one {mode} experiment from a config file")
        p.add_argument("--config", required=True, help="path to a TOML run config")
        p.add_argument("--seed", type=int, default=None, help="override [experiment] seed")
        p.add_argument("--out", default=None, help="override [experiment] out_dir")

    p = sub.add_parser("aggregate", help="summarize completed run directories")
    p.add_argument("run_dirs", nargs="+", help="run directories to pool")
    p.add_argument("--out", required=True, help="where to write report.json")
    p.add_argument("--bootstrap", type=int, default=DEFAULT_BOOTSTRAP,
                   help="bootstrap resample count")
    p.add_argument("--bootstrap-seed", type=int, default=0)

    p = sub.add_parser("plot-data", help="export tidy CSV for the plotting frontend")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--out", required=True, help="where to write the CSV")

    sub.add_parser("selftest", help="run the built-in invariant checks")
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return err.code if err.code is not None else USAGE_ERROR

    try:
        if args.command in ("train", "prime"):
            try:
                cfg = load_config(args.config)
            except (OSError, ConfigError) as err:
                print(f"ofnlab: cannot load config: {err}", file=sys.stderr)
                return USAGE_ERROR
            cfg = override(cfg, seed=args.seed, out_dir=args.out)
            expected = args.command
            if cfg.experiment.mode != expected:
                print(f"ofnlab: config has mode={cfg.experiment.mode!r}, "
                      f"expected {expected!r}", file=sys.stderr)
                return USAGE_ERROR
            run_dir = run_priming(cfg) if expected == "prime" else run_training(cfg)
            print(run_dir)
            return 0

        if args.command == "aggregate":
            missing = [d for d in args.run_dirs if not Path(d).is_dir()]
            if missing:
                print(f"ofnlab: not a run directory: {missing[0]}", file=sys.stderr)
                return USAGE_ERROR
            report = aggregate(args.run_dirs, n_resamples=args.bootstrap,
                               bootstrap_seed=args.bootstrap_seed)
            save_report(report, args.out)
            print(json.dumps({"configs": len(report["configs"]),
                              "excluded": len(report["excluded"])}))
            return 0

        if args.command == "plot-data":
            missing = [d for d in args.run_dirs if not Path(d).is_dir()]
            if missing:
                print(f"ofnlab: not a run directory: {missing[0]}", file=sys.stderr)
                return USAGE_ERROR
            rows = export_plot_data(args.run_dirs, args.out)
            print(f"wrote {rows} rows to {args.out}")
            return 0

        if args.command == "selftest":
            return 0 if run_selftest() else 1
    except ConfigError as err:
        print(f"ofnlab: {err}", file=sys.stderr)
        return USAGE_ERROR
    except Exception as err:  # noqa: BLE001 - single CLI boundary
        print(f"ofnlab: run failed: {err}", file=sys.stderr)
        return 1
    return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
