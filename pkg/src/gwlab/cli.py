from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from . import __version__
from .config import STUDIES, ExperimentConfig, default_config, load_config, load_profile
from .errors import ConfigError, NumericError
from .experiments import fit_scaling_exponent, run
from .report import emit, load_results
from .rendering import RenderConfig, Renderer, configure_logging
from .variance_profile import sqrt_profile, stability_radius, validate

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _add_display_arguments(parser: argparse.ArgumentParser) -> None:
    """Attach terminal output flags shared by every subcommand.

    Args:
        parser: Subparser instance to modify in place.
    """
    parser.add_argument("--no-color", action="store_true", help="Disable colored output.")
    parser.add_argument("-v", "--verbose", action="store_true", help="Log per-sample progress.")


def _positive_int(raw: str) -> int:
    value = int(raw)
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {raw}")
    return value


def _seed(raw: str) -> int:
    value = int(raw)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {raw}")
    return value


def build_parser() -> argparse.ArgumentParser:
    """Construct the top-level `gwlab` argument parser.

    Returns:
        Fully configured parser with all subcommands.
    """
    parser = argparse.ArgumentParser(
        prog="gwlab",
        description="Monte Carlo checks of spectral statistics for generalized Wigner matrices.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)

    profile_parser = subparsers.add_parser("profile", help="Inspect variance profiles.")
    profile_commands = profile_parser.add_subparsers(dest="profile_command", required=True)
    validate_parser = profile_commands.add_parser("validate", help="Validate a profile JSON file.")
    validate_parser.add_argument("--config", required=True, type=Path, help="Profile JSON file.")
    _add_display_arguments(validate_parser)

    run_parser = subparsers.add_parser("run", help="Run one study and write aggregated records.")
    run_parser.add_argument("study", choices=STUDIES)
    run_parser.add_argument("--config", type=Path, help="Experiment JSON config; a small default is used if omitted.")
    run_parser.add_argument("--seed", type=_seed, help="Override the config seed.")
    run_parser.add_argument("--out", type=Path, help="Results file path.")
    run_parser.add_argument("--workers", type=_positive_int, default=1, help="Worker processes.")
    run_parser.add_argument("--format", choices=("csv", "json"), help="Results file format.")
    _add_display_arguments(run_parser)

    report_parser = subparsers.add_parser("report", help="Post-process results files.")
    report_commands = report_parser.add_subparsers(dest="report_command", required=True)
    fit_parser = report_commands.add_parser("fit", help="Fit the N-scaling exponent of a statistic.")
    fit_parser.add_argument("results", type=Path, help="CSV or JSON results file.")
    fit_parser.add_argument("--statistic", required=True, help="Statistic name, e.g. 'eth_max[alternating]'.")
    _add_display_arguments(fit_parser)

    return parser


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    """Parse CLI arguments.

    Args:
        argv: Optional argument sequence; defaults to `sys.argv[1:]`.

    Returns:
        Parsed namespace.
    """
    return build_parser().parse_args(argv)


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """Load the study config and apply command-line overrides.

    Raises:
        ConfigError: If the config names a different study or fails validation.
    """
    if args.config is None:
        config = default_config(args.study)
    else:
        config = load_config(args.config)
        if config.study != args.study:
            raise ConfigError(f"Config {args.config} is for study '{config.study}', not '{args.study}'.")
    overrides: dict[str, object] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_path"] = args.out
    if args.format is not None:
        overrides["output_format"] = args.format
    return replace(config, **overrides) if overrides else config


def _run_profile_validate(args: argparse.Namespace, renderer: Renderer) -> int:
    profile = load_profile(args.config)
    report = validate(profile)
    sq = sqrt_profile(profile, strict=False) if report.passed else None
    op = stability_radius(profile) if report.passed else None
    renderer.render_validation(report, sq, op)
    if not report.passed:
        return EXIT_FAILED
    return EXIT_OK


def _run_study(args: argparse.Namespace, renderer: Renderer) -> int:
    config = resolve_config(args)
    renderer.render_run_header(config=config, workers=args.workers, out_path=config.output_path)
    result = run(config, workers=args.workers)
    renderer.render_records(result)
    if config.output_path is not None:
        emit(result, config.output_format, config.output_path)
        renderer.render_artifact(config.output_path, config.output_format)
    if result.any_failed:
        return EXIT_NUMERIC
    return EXIT_OK if result.all_passed else EXIT_FAILED


def _run_report_fit(args: argparse.Namespace, renderer: Renderer) -> int:
    result = load_results(args.results)
    exponent = fit_scaling_exponent(result, args.statistic)
    sizes = sorted({record.n for record in result.records if record.statistic == args.statistic})
    renderer.render_fit(args.statistic, exponent, sizes)
    return EXIT_OK


def main(argv: Sequence[str] | None = None) -> int:
    """Run the `gwlab` CLI entrypoint.

    Args:
        argv: Optional argument sequence; defaults to `sys.argv[1:]`.

    Returns:
        `0` when every record passes, `1` when a statistic is out of band or
        a profile fails validation, `2` on configuration errors and `3` on
        numerical failures.
    """
    args = parse_args(argv)
    render_config = RenderConfig(no_color=args.no_color, stdout_is_tty=sys.stdout.isatty())
    configure_logging(render_config, verbose=args.verbose)
    renderer = Renderer(render_config)

    try:
        if args.command == "profile":
            return _run_profile_validate(args, renderer)
        if args.command == "run":
            return _run_study(args, renderer)
        return _run_report_fit(args, renderer)
    except ConfigError as exc:
        renderer.render_error("Invalid configuration", str(exc))
        return EXIT_CONFIG
    except NumericError as exc:
        renderer.render_error("Numerical failure", f"{type(exc).__name__}: {exc}")
        return EXIT_NUMERIC
    except (OSError, ValueError) as exc:
        renderer.render_error("Run failed", str(exc))
        return EXIT_FAILED


if __name__ == "__main__":
    raise SystemExit(main())
