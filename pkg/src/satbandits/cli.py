"""Command-line entry point: ``satbandits {simulate,scaling,lowerbound,estimators,selfcheck}``."""

from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from .errors import BanditError
from .harness import (ALL_POLICIES, ExperimentConfig, Grid, estimator_report, lowerbound_report,
                      records_to_csv, rows_to_csv, run_experiment, scaling_report, write_output)
from .selfcheck import run_selfcheck

EXIT_OK, EXIT_PARAM, EXIT_SELFCHECK = 0, 2, 3

DEFAULTS = {
    "simulate": {},
    "scaling": {"family": "alternating", "policies": ["nonstat-sat"]},
    "lowerbound": {"family": "swap-window", "policies": list(ALL_POLICIES)},
    "estimators": {"family": "swap-window", "policies": ["nonstat-sat", "uniform"]},
    "selfcheck": {},
}


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file")
    common.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", help="output path (default: standard output)")
    common.add_argument("--replications", type=int, help="replications per grid point and policy")
    common.add_argument("--policies", help="comma-separated policy ids, e.g. nonstat-sat,fixed:2")
    common.add_argument("--family", help="swap-window | single-switch | alternating | schedule")
    common.add_argument("--schedule", help="schedule file for --family schedule")
    common.add_argument("--grid", help='e.g. "T=4096,16384;L=1,2;delta=0.3;S=0.5"')
    common.add_argument("--workers", type=int, help="worker processes (output does not depend on it)")
    common.add_argument("--noise", choices=["unit-gaussian", "zero"])
    common.add_argument("--timing", action="store_true", default=None,
                        help="record wall-clock runtime_ms (makes output non-reproducible)")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="satbandits", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in DEFAULTS:
        sub.add_parser(name, parents=[common])
    return parser


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    data: dict = {"kind": args.command, **DEFAULTS[args.command]}
    if args.config:
        import yaml

        with open(args.config) as fh:
            data.update(yaml.safe_load(fh) or {})
        data["kind"] = args.command
    flags = {"master_seed": args.seed, "out": args.out, "replications": args.replications,
             "policies": args.policies, "family": args.family, "schedule": args.schedule,
             "workers": args.workers, "noise": args.noise, "timing": args.timing}
    data.update({k: v for k, v in flags.items() if v is not None})
    if args.seed is not None:
        data.pop("seed", None)
    if args.grid:
        data["grid"] = Grid.parse(args.grid, base=Grid.coerce(data.get("grid")))
    return ExperimentConfig.from_mapping(data)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "selfcheck":
        results = run_selfcheck()
        for name, ok in results:
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
        return EXIT_OK if all(ok for _, ok in results) else EXIT_SELFCHECK
    try:
        config = build_config(args)
        if config.kind == "simulate":
            write_output(records_to_csv(run_experiment(config)), config.out)
        elif config.kind == "scaling":
            records = run_experiment(config)
            if config.out:
                write_output(records_to_csv(records), config.out)
            report = scaling_report(records)
            sys.stdout.write(report.to_csv())
            for policy, spread in sorted(report.spread.items()):
                verdict = "flat" if report.flat(policy) else "NON-FLAT"
                print(f"# {policy}: normalized spread {spread:.3f} ({verdict})", file=sys.stderr)
        elif config.kind == "lowerbound":
            records = run_experiment(config)
            if config.out:
                write_output(records_to_csv(records), config.out)
            sys.stdout.write(rows_to_csv(lowerbound_report(config, records)))
        elif config.kind == "estimators":
            write_output(rows_to_csv(estimator_report(config)), config.out)
    except BanditError as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
