"""Command-line driver: ``wealthvar <command> --config run.toml --seed N --out DIR``."""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import ConfigError, DataError, NumericalError
from .commands import COMMANDS
from .config import DEFAULTS, PipelineConfig, load_config

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERICAL = 0, 2, 3, 4

log = logging.getLogger("wealthvar")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wealthvar", description=__doc__)
    p.add_argument("command", choices=list(COMMANDS))
    p.add_argument("--config", metavar="PATH", help="TOML file overriding the built-in defaults")
    p.add_argument("--seed", type=int, help="random seed (required here or in the config)")
    p.add_argument("--out", metavar="DIR", help="output directory (default: config `out`, else ./run)")
    p.add_argument("--threads", type=int, default=1, help="worker processes for parallel Gibbs chains")
    p.add_argument("--allow-invalid-cohorts", action="store_true",
                   help="keep months below the cohort floor (flagged invalid) instead of failing")
    p.add_argument("-v", "--verbose", action="count", default=0)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, seed=args.seed, out=args.out)
        cfg.out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


__all__ = ["main", "build_parser", "load_config", "PipelineConfig", "DEFAULTS", "COMMANDS"]
