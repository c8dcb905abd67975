"""``frontlab`` command line: ``frontlab <pipeline> <config.toml> [--out DIR] [--threads N]``.

Exit codes: 0 when every gate passes, 1 on a gate failure or a numerical error,
2 on a configuration error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections.abc import Sequence

from .config import PIPELINES
from .errors import ConfigError, FrontlabError
from .logs import configure_logging
from .runner import run_experiment

logger = logging.getLogger(__name__)

THREADS_ENV = "FRONTLAB_THREADS"
EXIT_OK = 0
EXIT_GATE_FAILURE = 1
EXIT_CONFIG_ERROR = 2


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    """Parse the command line."""
    parser = argparse.ArgumentParser(
        prog="frontlab",
        description="Run a front-propagation experiment from a TOML config and gate it.",
    )
    parser.add_argument("pipeline", choices=PIPELINES, help="Pipeline; must match the config file.")
    parser.add_argument("config", help="Path to the TOML experiment file.")
    parser.add_argument("--out", default="runs", help="Parent directory of run directories (default: runs).")
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help=f"Solver threads; falls back to ${THREADS_ENV}, then to the config.",
    )
    parser.add_argument("-v", "--verbose", action="count", default=0, help="-v for INFO, -vv for DEBUG.")
    return parser.parse_args(argv)


def resolve_threads(threads: int | None) -> int | None:
    """Command-line value, else ``FRONTLAB_THREADS``, else None.

    Raises:
        ConfigError: The value is not a positive integer.
    """
    source = "--threads"
    if threads is None:
        raw = os.environ.get(THREADS_ENV)
        if not raw:
            return None
        source = THREADS_ENV
        try:
            threads = int(raw)
        except ValueError:
            raise ConfigError(f"expected an integer, got {raw!r}", key=source) from None
    if threads < 1:
        raise ConfigError(f"must be >= 1, got {threads}", key=source)
    return threads


def main(argv: Sequence[str] | None = None) -> int:
    """Entry point of the ``frontlab`` script."""
    args = parse_args(argv)
    configure_logging(args.verbose)
    try:
        records = run_experiment(args.config, args.out, resolve_threads(args.threads), args.pipeline)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except FrontlabError as err:
        logger.error("%s failed: %s", args.pipeline, err)
        return EXIT_GATE_FAILURE

    failed = [gate.name for record in records for gate in record.gates if not gate.passed]
    n_gates = sum(len(record.gates) for record in records)
    if failed:
        print(f"{len(failed)} of {n_gates} gates failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_GATE_FAILURE
    print(f"all {n_gates} gates passed")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
