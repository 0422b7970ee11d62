import argparse
import logging
import os
import sys
from typing import Any, Callable, Optional

from rankcal.controller import business
from rankcal.controller.exceptions import (
    ConfigError,
    DimensionError,
    MatrixFormatError,
    RankcalError,
    RegimeError,
    TiedScoresError,
)
from rankcal.model.calibration import (
    GAMMA_INFLUENTIAL,
    GAMMA_NEGLIGIBLE,
    LAMBDA_NEGLIGIBLE,
    Thresholds,
)
from rankcal.model.matrix_model import read_matrix
from rankcal.routes.formatting import format_response

logger = logging.getLogger(__name__)

THREADS_ENV = "RANKCAL_THREADS"

EXIT_OK = 0
EXIT_CHECKS_FAILED = 1
EXIT_BAD_INPUT = 2
EXIT_BAD_DIMENSION = 3
EXIT_TIED_SCORES = 4

EXIT_CODES = {
    MatrixFormatError: EXIT_BAD_INPUT,
    ConfigError: EXIT_BAD_INPUT,
    DimensionError: EXIT_BAD_DIMENSION,
    RegimeError: EXIT_BAD_DIMENSION,
    TiedScoresError: EXIT_TIED_SCORES,
}


def register_routes(subparsers: Any, common: argparse.ArgumentParser) -> None:
    """
    Register one subcommand per route.

    Args:
        subparsers (Any): The action returned by ``ArgumentParser.add_subparsers``.
        common (ArgumentParser): Parent parser holding the shared flags.
    """
    analyze = subparsers.add_parser(
        "analyze", parents=[common], help="Structured analysis of one comparison matrix."
    )
    analyze.add_argument("matrix", help="CSV file with n rows of n comma-separated numbers.")
    analyze.add_argument("--samples", type=int, default=business.DEFAULT_SAMPLES)
    analyze.add_argument("--seed", type=int, default=business.DEFAULT_SEED)
    analyze.add_argument("--lambda0", type=float, default=LAMBDA_NEGLIGIBLE)
    analyze.add_argument("--gamma0", type=float, default=GAMMA_NEGLIGIBLE)
    analyze.add_argument("--gamma1", type=float, default=GAMMA_INFLUENTIAL)
    analyze.set_defaults(handler=analyze_matrix)

    simulate = subparsers.add_parser(
        "simulate", parents=[common], help="Run the scenarios of a JSON config file."
    )
    simulate.add_argument("config", help="Scenario config JSON.")
    simulate.set_defaults(handler=simulate_scenarios)

    reproduce = subparsers.add_parser(
        "reproduce", parents=[common], help="Recompute the reference tables."
    )
    reproduce.add_argument(
        "which", nargs="?", default="all", choices=business.REPRODUCIBLE + ["all"]
    )
    reproduce.add_argument("--seed", type=int, default=business.DEFAULT_SEED)
    reproduce.add_argument(
        "--replications", type=int, default=None, help="Override the reference replication counts."
    )
    reproduce.set_defaults(handler=reproduce_reference)

    echo = subparsers.add_parser(
        "echo", parents=[common], help="Parse a matrix and write it back as CSV."
    )
    echo.add_argument("matrix")
    echo.set_defaults(handler=echo_matrix)


def resolve_threads(threads: Optional[int]) -> int:
    """
    Thread count from the flag, then the environment, then 1.

    Raises:
        ConfigError: If the value is not a positive integer.
    """
    raw = threads if threads is not None else os.environ.get(THREADS_ENV, "1")
    try:
        value = int(raw)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid thread count {raw!r}.") from e
    if value < 1:
        raise ConfigError(f"Thread count must be positive, got {value}.")
    return value


def write_output(text: str, path: Optional[str]) -> None:
    if path is None:
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    with open(path, "w", encoding="utf-8") as f:
        f.write(text)
    logger.info("Wrote %s", path)


def analyze_matrix(args: argparse.Namespace) -> int:
    """
    Analyze one matrix. A tie in the estimated scores still writes the partial report.

    Raises:
        TiedScoresError: After writing the report, if the central region is undefined.
    """
    try:
        thresholds = Thresholds(args.lambda0, args.gamma0, args.gamma1)
    except ValueError as e:
        raise ConfigError(str(e)) from e
    X = read_matrix(args.matrix)
    report = business.analyze(
        X,
        samples=args.samples,
        seed=args.seed,
        thresholds=thresholds,
        threads=resolve_threads(args.threads),
    )
    report["input"]["path"] = args.matrix
    write_output(format_response(report, args.format), args.output)
    if report["status"] == "error":
        raise TiedScoresError(report["error"])
    return EXIT_OK


def simulate_scenarios(args: argparse.Namespace) -> int:
    threads = resolve_threads(args.threads)
    scenarios, tau_study = business.load_simulation(args.config)
    report = business.simulate(scenarios, tau_study, threads=threads)
    write_output(format_response(report, args.format), args.output)
    return EXIT_OK


def reproduce_reference(args: argparse.Namespace) -> int:
    if args.replications is not None and args.replications < 1:
        raise ConfigError(f"replications must be positive, got {args.replications}.")
    report = business.reproduce(
        args.which,
        seed=args.seed,
        replications=args.replications,
        threads=resolve_threads(args.threads),
    )
    write_output(format_response(report, args.format), args.output)
    return EXIT_OK if report["status"] == "ok" else EXIT_CHECKS_FAILED


def echo_matrix(args: argparse.Namespace) -> int:
    write_output(business.echo(read_matrix(args.matrix)), args.output)
    return EXIT_OK


def exit_code(error: RankcalError) -> int:
    for kind, code in EXIT_CODES.items():
        if isinstance(error, kind):
            return code
    return EXIT_BAD_INPUT


def dispatch(args: argparse.Namespace) -> int:
    """
    Run the handler of the parsed subcommand and map domain errors to exit codes.

    Args:
        args (Namespace): Parsed arguments carrying ``handler``.

    Returns:
        int: Process exit code.
    """
    handler: Callable[[argparse.Namespace], int] = args.handler
    try:
        return handler(args)
    except RankcalError as e:
        logger.debug("%s failed", args.command, exc_info=True)
        sys.stderr.write(f"rankcal {args.command}: error: {e}\n")
        return exit_code(e)
