import argparse
import logging
import sys
from typing import Optional, Sequence

from rankcal.routes import routes

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"
LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None, help=f"Defaults to ${routes.THREADS_ENV}, then 1.")
    common.add_argument("--format", choices=["json", "text"], default="json")
    common.add_argument("--output", default=None, help="Report path; stdout when omitted.")
    common.add_argument("--log-level", choices=LOG_LEVELS, default="WARNING")

    parser = argparse.ArgumentParser(
        prog="rankcal",
        description="Ranking uncertainty for noisy nonreciprocal pairwise comparison matrices.",
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    routes.register_routes(subparsers, common)
    return parser


def Start(argv: Optional[Sequence[str]] = None) -> int:
    # Build the command-line app
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)

    # Diagnostics go to stderr; stdout carries only the report
    logging.basicConfig(level=args.log_level, stream=sys.stderr, format=LOG_FORMAT)
    logging.getLogger().setLevel(args.log_level)

    return routes.dispatch(args)
