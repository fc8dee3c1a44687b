from __future__ import annotations

import logging
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import TextIO

from rich import box
from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from .config import ExperimentConfig
from .report import RunResult
from .variance_profile import SqrtProfile, StabilityOperator, ValidationReport

LOG_FORMAT = "%(name)s: %(message)s"


@dataclass(frozen=True)
class RenderConfig:
    no_color: bool
    stdout_is_tty: bool
    terminal_width: int | None = None


def create_console(config: RenderConfig, file: TextIO | None = None) -> Console:
    """Create a Rich console configured for color and width behavior.

    Args:
        config: Rendering configuration flags.
        file: Optional output stream override.

    Returns:
        Configured Rich console instance.
    """
    enable_color = (not config.no_color) and config.stdout_is_tty
    return Console(
        file=file or sys.stdout,
        force_terminal=enable_color,
        color_system="auto" if enable_color else None,
        no_color=not enable_color,
        highlight=False,
        width=config.terminal_width,
    )


def configure_logging(config: RenderConfig, verbose: bool = False) -> None:
    """Route library logging through a Rich handler on stderr.

    Args:
        config: Rendering flags; color is dropped the same way as for stdout.
        verbose: Log at DEBUG instead of INFO.
    """
    console = create_console(
        RenderConfig(no_color=config.no_color, stdout_is_tty=sys.stderr.isatty(), terminal_width=config.terminal_width),
        file=sys.stderr,
    )
    handler = RichHandler(console=console, show_path=False, markup=False, rich_tracebacks=False)
    handler.setFormatter(logging.Formatter(LOG_FORMAT))
    root = logging.getLogger()
    for existing in list(root.handlers):
        if isinstance(existing, RichHandler):
            root.removeHandler(existing)
    root.addHandler(handler)
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


def format_value(value: float) -> str:
    """Compact float text for tables; full precision lives in the result files."""
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.4g}"


def _pass_label(passed: bool, failed: bool) -> str:
    if failed:
        return "[red]FAILED[/red]"
    return "[green]pass[/green]" if passed else "[yellow]out of band[/yellow]"


class Renderer:
    def __init__(self, config: RenderConfig, file: TextIO | None = None) -> None:
        """Initialize a renderer with a configured Rich console.

        Args:
            config: Rendering configuration flags.
            file: Optional output stream override.
        """
        self.console = create_console(config, file=file)

    def render_run_header(self, *, config: ExperimentConfig, workers: int, out_path: Path | None) -> None:
        """Render the run overview panel.

        Args:
            config: Experiment about to run.
            workers: Worker process count.
            out_path: Results destination, if any.
        """
        table = Table.grid(expand=True, padding=(0, 1))
        table.add_column(style="bold cyan", no_wrap=True)
        table.add_column(style="white")
        profile = config.profile.kind
        if config.profile.beta is not None:
            profile = f"{profile} (beta={config.profile.beta:g})"
        table.add_row("Study", config.study)
        table.add_row("Profile", profile)
        table.add_row("Entry Law", config.law)
        table.add_row("Sizes", ", ".join(str(n) for n in config.sizes))
        table.add_row("Samples per Size", str(config.samples_per_size))
        table.add_row("Seed", str(config.seed))
        table.add_row("Workers", str(workers))
        table.add_row("Results", str(out_path) if out_path else "(not written)")
        self.console.print(Panel(table, title="Run Overview", border_style="cyan"))

    def render_validation(
        self,
        report: ValidationReport,
        sq: SqrtProfile | None = None,
        op: StabilityOperator | None = None,
    ) -> None:
        """Render the checks of `profile validate`."""
        table = Table(title="Profile Validation", box=box.ROUNDED, expand=True)
        table.add_column("Check", style="bold cyan", no_wrap=True)
        table.add_column("Value", style="white")
        table.add_column("Status", no_wrap=True)
        table.add_row("Dimension", str(report.n), "")
        checks = report.checks
        positive = checks.get("strictly_positive", checks.get("nonnegative", True))
        table.add_row("Symmetry defect", format_value(report.symmetry_defect), _pass_label(checks.get("symmetric", True), False))
        table.add_row("Row-sum deviation", format_value(report.row_sum_deviation), _pass_label(checks.get("row_sums", True), False))
        table.add_row("Min entry", format_value(report.min_entry), _pass_label(positive, False))
        if sq is not None:
            i, j, value = sq.worst_entry
            table.add_row(
                "Square-root constant C", format_value(sq.bound_constant), _pass_label(sq.assumption_holds, False)
            )
            table.add_row("Smallest root entry", f"{format_value(value)} at ({i}, {j})", "")
        if op is not None:
            table.add_row(
                "Stability radius",
                f"{format_value(op.spectral_radius)} <= {format_value(op.radius_bound)}",
                _pass_label(op.spectral_radius <= op.radius_bound + 1e-8, False),
            )
        self.console.print(table)

    def render_records(self, result: RunResult) -> None:
        """Render aggregated records, one row per (N, statistic)."""
        table = Table(title=f"Results: {result.study}", box=box.ROUNDED, expand=True)
        table.add_column("N", style="bold cyan", no_wrap=True, justify="right")
        table.add_column("statistic", style="white", overflow="fold")
        table.add_column("mean", justify="right")
        table.add_column("stderr", justify="right")
        table.add_column("p50", justify="right")
        table.add_column("p99", justify="right")
        table.add_column("envelope", justify="right")
        table.add_column("pass", no_wrap=True)
        for record in result.records:
            table.add_row(
                str(record.n),
                record.statistic,
                format_value(record.mean),
                format_value(record.stderr),
                format_value(record.p50),
                format_value(record.p99),
                format_value(record.envelope),
                _pass_label(record.passed, record.failed),
            )
        self.console.print(table)
        errors = sorted({record.error for record in result.records if record.error})
        for message in errors:
            self.console.print(f"[red]{message}[/red]")
        if result.provenance is not None:
            self.console.print(
                f"[dim]config {result.provenance.config_hash[:12]}  seed {result.provenance.seed}  "
                f"gwlab {result.provenance.code_version}[/dim]"
            )

    def render_fit(self, statistic: str, exponent: float, sizes: list[int]) -> None:
        """Render a fitted scaling exponent.

        Args:
            statistic: Statistic the slope was fitted on.
            exponent: Fitted log-log slope.
            sizes: Sizes that carried the statistic, ascending.
        """
        table = Table.grid(expand=True, padding=(0, 1))
        table.add_column(style="bold cyan", no_wrap=True)
        table.add_column(style="white")
        table.add_row("Statistic", statistic)
        table.add_row("Sizes", ", ".join(str(n) for n in sizes))
        table.add_row("Exponent", f"{exponent:.4f}")
        self.console.print(Panel(table, title="Scaling Fit", border_style="cyan"))

    def render_artifact(self, path: Path, output_format: str) -> None:
        """Render the written results file.

        Args:
            path: Location of the results file.
            output_format: `csv` or `json`.
        """
        artifacts = Table(title="Report Files", box=box.ROUNDED, expand=True)
        artifacts.add_column("Type", style="bold cyan", no_wrap=True)
        artifacts.add_column("Path", style="white")
        artifacts.add_row(output_format.upper(), str(path))
        self.console.print(artifacts)
        self.console.print("[dim]Full-precision values are saved in the results file.[/dim]")

    def render_error(self, message: str, details: str | None = None) -> None:
        """Render an error panel with optional details.

        Args:
            message: Primary error message.
            details: Optional secondary context text.
        """
        body = message if not details else f"{message}\n\n{details}"
        self.console.print(Panel(body, title="Error", border_style="red"))
