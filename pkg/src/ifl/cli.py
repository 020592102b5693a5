"""Command-line entry point.

    ifl simulate <config>                      run an experiment from a file
    ifl experiment <name> [--runs --seed ...]  run a named experiment
    ifl stability-check <bounds-file>          evaluate stability conditions

Exit codes: 0 success, 2 configuration error, 3 excessive divergence.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import (
    ConfigError,
    EXPERIMENTS,
    ExperimentConfig,
    load_config,
    parse_bounds_section,
    parse_inverse_bounds_section,
)
from .harness import ExcessiveDivergence, execute
from .stability import check_forward_stability, check_inverse_stability

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGENCE = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ifl",
        description="inverse-filtering Monte-Carlo experiment harness")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run an experiment from a config file")
    sim.add_argument("config", type=Path)

    exp = sub.add_parser("experiment", help="run a named experiment")
    exp.add_argument("name", choices=[e for e in EXPERIMENTS
                                      if e != "stability-sweep"])
    exp.add_argument("--runs", type=int, default=None)
    exp.add_argument("--horizon", type=int, default=None)
    exp.add_argument("--seed", type=int, default=0)
    exp.add_argument("--out", type=str, default="results")
    exp.add_argument("--workers", type=int, default=None)
    exp.add_argument("--true-forward", type=str, default=None)
    exp.add_argument("--assumed-forward", type=str, default=None)

    stab = sub.add_parser("stability-check",
                          help="evaluate stability conditions from a bounds file")
    stab.add_argument("bounds_file", type=Path)
    stab.add_argument("--out", type=str, default=None,
                      help="also write the report to this file")
    return parser


_EXPERIMENT_DEFAULTS = {
    "fm-demod": {"runs": 500, "horizon": 100},
    "bearing": {"runs": 400, "horizon": 200},
    "rkhs-fm": {"runs": 500, "horizon": 100},
}


def _cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    paths = execute(cfg)
    for label, path in paths.items():
        print(f"{label}: {path}")
    return EXIT_OK


def _cmd_experiment(args) -> int:
    defaults = _EXPERIMENT_DEFAULTS[args.name]
    cfg = ExperimentConfig(
        experiment=args.name,
        runs=args.runs if args.runs is not None else defaults["runs"],
        horizon=args.horizon if args.horizon is not None else defaults["horizon"],
        seed=args.seed,
        out_dir=args.out,
        workers=args.workers,
        true_forward=args.true_forward,
        assumed_forward=args.assumed_forward,
    )
    cfg.validate()
    paths = execute(cfg)
    for label, path in paths.items():
        print(f"{label}: {path}")
    return EXIT_OK


def _cmd_stability_check(args) -> int:
    import configparser

    parser = configparser.ConfigParser()
    if not args.bounds_file.exists():
        raise ConfigError(f"bounds file not found: {args.bounds_file}")
    try:
        parser.read(args.bounds_file)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse bounds file: {exc}") from exc
    if "bounds" not in parser:
        raise ConfigError("bounds file must contain a [bounds] section")
    bounds = parse_bounds_section(parser["bounds"])
    if "inverse_bounds" in parser:
        ext = parse_inverse_bounds_section(parser["inverse_bounds"])
        report = check_inverse_stability(bounds, ext)
    else:
        report = check_forward_stability(bounds)
    text = report.to_text()
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "experiment":
            return _cmd_experiment(args)
        return _cmd_stability_check(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ExcessiveDivergence as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return EXIT_DIVERGENCE


if __name__ == "__main__":
    sys.exit(main())
