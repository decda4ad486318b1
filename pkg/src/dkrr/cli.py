"""Command-line entry point: ``dkrr <simulation> [--config F] [--seed S] [--out P] [--trials T]``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import ConfigurationError, NumericalFailureError
from .experiments import SIMULATIONS, default_config, emit_csv, load_config, run_experiment, write_metadata

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("dkrr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dkrr", description="Distributed KRR simulations.")
    sub = parser.add_subparsers(dest="simulation", required=True)
    for name in SIMULATIONS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", type=Path, help="YAML file with ExperimentConfig fields")
        p.add_argument("--seed", type=int, help="base seed; trial t uses seed + t")
        p.add_argument("--out", type=Path, help="CSV output path (default: <simulation>.csv)")
        p.add_argument("--trials", type=int, help="number of trials")
        p.add_argument("--task", choices=("g1", "g2"), help="regression target")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    overrides = {k: getattr(args, k) for k in ("seed", "trials", "task") if getattr(args, k) is not None}
    try:
        if args.config is not None:
            cfg = load_config(args.config, args.simulation, **overrides)
        else:
            cfg = default_config(args.simulation, **overrides)
        out = args.out or Path(cfg.out or f"{args.simulation}.csv")
        records = run_experiment(cfg)
        emit_csv(records, out)
        write_metadata(cfg, Path(str(out) + ".meta.json"))
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"wrote {len(records)} records to {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
