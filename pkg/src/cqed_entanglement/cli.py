"""Command-line entry point: ``cqed-entangle <experiment> --config file.json``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import CQEDError
from .experiments import EXPERIMENTS, RUNNERS, ConfigError, load_config_file, resolve_config

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cqed-entangle",
        description="Trajectory entanglement experiments for a driven atom in a damped cavity.",
    )
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="JSON config or a previous run's manifest.json")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--jobs", type=int, help="worker processes")
    p.add_argument("--n-traj", type=int, dest="n_traj", help="trajectories per sweep point")
    p.add_argument("--out", dest="out_dir", help="output root directory")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        file_values = load_config_file(args.config) if args.config else {}
        config = resolve_config(args.experiment, file_values, seed=args.seed, jobs=args.jobs,
                                n_traj=args.n_traj, out_dir=args.out_dir)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = RUNNERS[args.experiment](config)
    except CQEDError as exc:
        print(f"run failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    if args.experiment == "validate":
        for check in result["checks"]:
            mark = "PASS" if check["passed"] else ("FAIL" if check["hard"] else "note")
            print(f"{mark:4s} {check['name']}")
        return EXIT_OK if result["passed"] else EXIT_VALIDATION
    print(f"wrote {config['out_dir']}/{args.experiment}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
