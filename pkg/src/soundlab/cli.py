"""Command-line entry point: ``soundlab <experiment> --config <path> [--out <dir>] [--seed <int>]``.

Exit codes: 0 success, 2 invalid configuration, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import EXPERIMENTS, ConfigError, load, resolve
from .meanfield import NumericalError
from .results import write_outputs

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="soundlab",
        description="Bose gas sound-wave experiments. Flags override the matching config keys.",
    )
    sub = parser.add_subparsers(dest="experiment", required=True, metavar="experiment")
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", required=True, help="JSON config file")
        p.add_argument("--out", help="output directory (overrides output_dir)")
        p.add_argument("--seed", type=int, help="noise seed (overrides seed)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    from .experiments import run

    try:
        cfg = resolve(load(args.config), args.experiment, out=args.out, seed=args.seed)
    except ConfigError as exc:
        print(f"soundlab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run(cfg)
    except NumericalError as exc:
        print(f"soundlab: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        # construction checks that only fire once the numerics are assembled
        print(f"soundlab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    paths = write_outputs(cfg["output_dir"], cfg, result)
    print(json.dumps(result.summary, sort_keys=True, default=str))
    for p in paths:
        print(f"wrote {p}")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
