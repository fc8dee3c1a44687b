from __future__ import annotations

import dataclasses
import json
import tempfile
import unittest
from pathlib import Path

import sys

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from gwlab.config import (
    STUDIES,
    ExperimentConfig,
    config_digest,
    config_from_dict,
    config_to_dict,
    default_config,
    load_config,
    load_profile,
    parse_complex,
)
from gwlab.errors import ConfigError


class ConfigParsingTests(unittest.TestCase):
    def test_minimal_payload_uses_defaults(self) -> None:
        config = config_from_dict({"study": "stability"})
        self.assertEqual(config.sizes, (64,))
        self.assertEqual(config.samples_per_size, 10)
        self.assertEqual(config.law, "complex_gaussian")
        self.assertEqual(config.profile.kind, "flat")
        self.assertEqual(config.observables, ("alternating",))
        self.assertIsNone(config.output_path)
        self.assertEqual(config.bands.eth_median_cap, 30.0)

    def test_full_payload(self) -> None:
        config = config_from_dict(
            {
                "study": "two_resolvent",
                "profile": {"kind": "cosine", "beta": 0.5},
                "sizes": [16, 32],
                "samples_per_size": 4,
                "z_grid": [[0.3, 0.5], "0.3-0.5i"],
                "observables": [{"kind": "fourier", "frequency": 2}],
                "kernel": "self_consistent",
                "seed": 11,
                "output_path": "out/two.csv",
                "format": "json",
                "bands": {"prediction_relative": 0.2},
            },
            source="two.json",
        )
        self.assertEqual(config.profile.beta, 0.5)
        self.assertEqual(config.z_grid, (0.3 + 0.5j, 0.3 - 0.5j))
        self.assertEqual(config.kernel, "self_consistent")
        self.assertEqual(config.output_path, Path("out/two.csv"))
        self.assertEqual(config.output_format, "json")
        self.assertEqual(config.bands.prediction_relative, 0.2)
        self.assertEqual(config.profile.build(16).kind, "cosine")

    def test_sinkhorn_profile_builds_at_each_size(self) -> None:
        config = config_from_dict({"study": "stability", "profile": {"kind": "sinkhorn", "beta": 0.4}, "sizes": [8, 16]})
        self.assertEqual(config.profile.beta, 0.4)
        for n in config.sizes:
            profile = config.profile.build(n)
            self.assertEqual((profile.kind, profile.n), ("sinkhorn", n))

    def test_invalid_payloads_name_the_source(self) -> None:
        bad = {
            "not an object": [],
            "unknown study": {"study": "spectra"},
            "unknown law": {"study": "stability", "law": "cauchy"},
            "empty sizes": {"study": "stability", "sizes": []},
            "descending sizes": {"study": "stability", "sizes": [64, 32]},
            "bool size": {"study": "stability", "sizes": [True]},
            "one sample": {"study": "stability", "samples_per_size": 1},
            "negative seed": {"study": "stability", "seed": -1},
            "real z": {"study": "identities", "z_grid": [[0.5, 0.0]]},
            "missing z": {"study": "identities"},
            "one z for two_resolvent": {"study": "two_resolvent", "z_grid": [[0, 1]]},
            "local law without grid": {"study": "local_law", "energies": [0.0]},
            "local law below the axis": {"study": "local_law", "z_grid": [[0.0, 1.0], [0.0, -0.5]]},
            "missing j": {"study": "bridge"},
            "j out of range": {"study": "bridge", "j_exponent": 1.0},
            "cosine without beta": {"study": "stability", "profile": {"kind": "cosine"}},
            "sinkhorn without beta": {"study": "stability", "profile": {"kind": "sinkhorn"}},
            "unknown profile": {"study": "stability", "profile": "banded"},
            "unknown band": {"study": "stability", "bands": {"speed": 1}},
            "unknown kernel": {"study": "stability", "kernel": "exact"},
            "unknown format": {"study": "stability", "format": "xml"},
            "empty observables": {"study": "stability", "observables": []},
        }
        for label, payload in bad.items():
            with self.subTest(label=label):
                with self.assertRaises(ConfigError) as ctx:
                    config_from_dict(payload, source="bad.json")
                self.assertIn("bad.json", str(ctx.exception))

    def test_config_errors_are_value_errors(self) -> None:
        with self.assertRaises(ValueError):
            config_from_dict({"study": "nope"})


class ComplexParsingTests(unittest.TestCase):
    def test_accepted_forms(self) -> None:
        self.assertEqual(parse_complex([0.5, 1], "x"), 0.5 + 1j)
        self.assertEqual(parse_complex({"re": -1, "im": 0.25}, "x"), -1 + 0.25j)
        self.assertEqual(parse_complex({"im": 2}, "x"), 2j)
        self.assertEqual(parse_complex("0.3 - 0.5i", "x"), 0.3 - 0.5j)

    def test_rejected_forms(self) -> None:
        for value in ([1], "abc", 3, {"re": 1}, [1, 0]):
            with self.subTest(value=value):
                with self.assertRaises(ConfigError):
                    parse_complex(value, "x")


class ConfigRoundTripTests(unittest.TestCase):
    def test_dict_form_reloads_to_equal_config(self) -> None:
        config = config_from_dict(
            {
                "study": "local_law",
                "profile": {"kind": "cosine", "beta": 0.25},
                "energies": [0.0, 1.5],
                "eta_exponent": 0.6,
                "output_path": "ll.csv",
            }
        )
        reloaded = config_from_dict(json.loads(json.dumps(config_to_dict(config))))
        self.assertEqual(reloaded, config)

    def test_digest_ignores_output_location(self) -> None:
        config = default_config("stability")
        moved = dataclasses.replace(config, output_path=Path("elsewhere.json"), output_format="json")
        reseeded = dataclasses.replace(config, seed=config.seed + 1)
        self.assertEqual(config_digest(config), config_digest(moved))
        self.assertNotEqual(config_digest(config), config_digest(reseeded))
        self.assertEqual(len(config_digest(config)), 64)


class DefaultConfigTests(unittest.TestCase):
    def test_every_study_has_a_default(self) -> None:
        for study in STUDIES:
            with self.subTest(study=study):
                config = default_config(study)
                self.assertIsInstance(config, ExperimentConfig)
                self.assertEqual(config.study, study)

    def test_unknown_study(self) -> None:
        with self.assertRaises(ConfigError):
            default_config("spectra")  # type: ignore[arg-type]


class FileLoadingTests(unittest.TestCase):
    def test_shipped_configs_are_valid(self) -> None:
        for path in sorted((ROOT / "configs").glob("*.json")):
            if path.name.startswith("profile_"):
                self.assertEqual(load_profile(path).n, 64)
                continue
            with self.subTest(config=path.name):
                self.assertIn(load_config(path).study, STUDIES)

    def test_missing_and_malformed_files(self) -> None:
        with tempfile.TemporaryDirectory() as tmp_dir:
            missing = Path(tmp_dir) / "missing.json"
            broken = Path(tmp_dir) / "broken.json"
            broken.write_text("{", encoding="utf-8")
            for loader in (load_config, load_profile):
                for path in (missing, broken):
                    with self.subTest(loader=loader.__name__, path=path.name):
                        with self.assertRaises(ConfigError) as ctx:
                            loader(path)
                        self.assertIn(str(path), str(ctx.exception))

    def test_invalid_profile_file_names_path(self) -> None:
        with tempfile.TemporaryDirectory() as tmp_dir:
            path = Path(tmp_dir) / "profile.json"
            path.write_text(json.dumps({"n": 4, "kind": "spiral"}), encoding="utf-8")
            with self.assertRaises(ConfigError) as ctx:
                load_profile(path)
            self.assertIn("profile.json", str(ctx.exception))


if __name__ == "__main__":
    unittest.main()
