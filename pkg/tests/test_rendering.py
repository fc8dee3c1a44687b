from __future__ import annotations

import io
import logging
import unittest
from pathlib import Path

import sys

from rich.logging import RichHandler

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from gwlab.config import config_from_dict
from gwlab.report import Provenance, Record, RunResult
from gwlab.rendering import RenderConfig, Renderer, configure_logging, format_value
from gwlab.variance_profile import build_cosine_circulant, build_explicit, sqrt_profile, stability_radius, validate


def _renderer(buffer: io.StringIO) -> Renderer:
    return Renderer(RenderConfig(no_color=True, stdout_is_tty=True, terminal_width=160), file=buffer)


class RenderingTests(unittest.TestCase):
    def test_run_overview_and_records_without_ansi(self) -> None:
        buffer = io.StringIO()
        renderer = _renderer(buffer)
        config = config_from_dict(
            {"study": "eth_scaling", "profile": {"kind": "cosine", "beta": 0.5}, "sizes": [128, 256], "seed": 4}
        )
        renderer.render_run_header(config=config, workers=2, out_path=Path("/tmp/out/eth.csv"))
        renderer.render_records(
            RunResult(
                study="eth_scaling",
                records=(
                    Record("eth_scaling", 128, "eth_max[alternating]", 0.12, 0.01, 0.11, 0.15, 0.2, 2.65, True),
                    Record("eth_scaling", 256, "eth_max[alternating]", 0.09, 0.01, 0.08, 0.1, 0.12, 1.875, False),
                ),
                provenance=Provenance(config_hash="0123456789abcdef" * 4, seed=4, code_version="0.1.0"),
            )
        )
        renderer.render_artifact(Path("/tmp/out/eth.csv"), "csv")

        output = buffer.getvalue()
        self.assertIn("Run Overview", output)
        self.assertIn("cosine (beta=0.5)", output)
        self.assertIn("128, 256", output)
        self.assertIn("Results: eth_scaling", output)
        self.assertIn("pass", output)
        self.assertIn("out of band", output)
        self.assertIn("config 0123456789ab", output)
        self.assertIn("Report Files", output)
        self.assertNotIn("\x1b[", output)

    def test_failed_records_show_error(self) -> None:
        buffer = io.StringIO()
        nan = float("nan")
        record = Record("bridge", 64, "samples", nan, nan, nan, nan, nan, nan, False, True, "NoSolution: bracket lost")
        _renderer(buffer).render_records(RunResult(study="bridge", records=(record,)))
        output = buffer.getvalue()
        self.assertIn("FAILED", output)
        self.assertIn("NoSolution: bracket lost", output)

    def test_validation_table(self) -> None:
        profile = build_cosine_circulant(16, 0.5)
        buffer = io.StringIO()
        _renderer(buffer).render_validation(validate(profile), sqrt_profile(profile), stability_radius(profile))
        output = buffer.getvalue()
        self.assertIn("Profile Validation", output)
        self.assertIn("Square-root constant C", output)
        self.assertIn("Stability radius", output)

        buffer = io.StringIO()
        _renderer(buffer).render_validation(validate(build_explicit([[0.7, 0.2], [0.2, 0.7]])))
        self.assertIn("out of band", buffer.getvalue())
        self.assertNotIn("Stability radius", buffer.getvalue())

    def test_error_panel(self) -> None:
        buffer = io.StringIO()
        _renderer(buffer).render_error("Invalid configuration", "Expected top-level object in x.json.")
        output = buffer.getvalue()
        self.assertIn("Error", output)
        self.assertIn("x.json", output)

    def test_format_value(self) -> None:
        self.assertEqual(format_value(0.123456), "0.1235")
        self.assertEqual(format_value(float("nan")), "nan")
        self.assertEqual(format_value(float("-inf")), "-inf")

    def test_configure_logging_replaces_rich_handler(self) -> None:
        root = logging.getLogger()
        saved_handlers, saved_level = list(root.handlers), root.level
        try:
            config = RenderConfig(no_color=True, stdout_is_tty=False)
            configure_logging(config)
            configure_logging(config, verbose=True)
            rich_handlers = [handler for handler in root.handlers if isinstance(handler, RichHandler)]
            self.assertEqual(len(rich_handlers), 1)
            self.assertEqual(root.level, logging.DEBUG)
        finally:
            root.handlers[:] = saved_handlers
            root.setLevel(saved_level)


if __name__ == "__main__":
    unittest.main()
