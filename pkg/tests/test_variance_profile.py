from __future__ import annotations

import unittest
from pathlib import Path

import sys

import numpy as np
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from gwlab.errors import AssumptionViolated, ConfigError, NearSingular, NotPSD, ProfileInvalid
from gwlab.observables import build_m0
from gwlab.variance_profile import (
    build_cosine_circulant,
    build_explicit,
    build_flat,
    build_sinkhorn,
    build_sinkhorn_ramp,
    cosine_generator,
    ensure_valid,
    profile_from_json,
    profile_label,
    profile_to_json,
    random_mix_profile,
    sqrt_profile,
    stability_radius,
    stability_solve,
    validate,
)

# Principal root circ(0.6, 0.21, -0.02, 0.21) is PSD with a negative entry.
NEGATIVE_ROOT_PROFILE = scipy.linalg.circulant([0.4486, 0.2436, 0.0642, 0.2436])


class BuildProfileTests(unittest.TestCase):
    def test_flat_profile_is_uniform_and_valid(self) -> None:
        profile = build_flat(4)
        np.testing.assert_allclose(profile.s, np.full((4, 4), 0.25))
        self.assertEqual(profile.c_lower, 1.0)
        self.assertTrue(validate(profile).passed)

    def test_flat_rejects_empty_dimension(self) -> None:
        with self.assertRaises(ValueError):
            build_flat(0)

    def test_cosine_profile_rows_sum_to_one_with_bounded_entries(self) -> None:
        n, beta = 16, 0.5
        profile = build_cosine_circulant(n, beta)
        np.testing.assert_allclose(profile.s.sum(axis=1), np.ones(n), atol=1e-12)
        self.assertGreaterEqual(profile.s.min(), (1 - beta) ** 2 / n - 1e-15)
        self.assertLessEqual(profile.s.max(), (1 + beta) ** 2 / n + 1e-15)
        self.assertTrue(validate(profile).passed)
        self.assertEqual(profile_label(profile), "cosine(n=16, beta=0.5)")

    def test_cosine_rejects_out_of_range_beta(self) -> None:
        with self.assertRaises(ValueError):
            build_cosine_circulant(8, 1.0)
        with self.assertRaises(ValueError):
            build_cosine_circulant(8, -0.1)

    def test_profile_arrays_are_read_only(self) -> None:
        profile = build_flat(3)
        with self.assertRaises(ValueError):
            profile.s[0, 0] = 1.0

    def test_sinkhorn_scaling_produces_valid_profile(self) -> None:
        rng = np.random.default_rng(11)
        raw = rng.uniform(0.5, 2.0, size=(12, 12))
        profile = build_sinkhorn(raw + raw.T)
        report = validate(profile)
        self.assertTrue(report.passed, report.failures)

    def test_sinkhorn_rejects_non_positive_kernel(self) -> None:
        with self.assertRaises(ValueError):
            build_sinkhorn(np.array([[1.0, 0.0], [0.0, 1.0]]))

    def test_sinkhorn_ramp_profile_is_valid_and_not_circulant(self) -> None:
        profile = build_sinkhorn_ramp(16, 0.6)
        report = validate(profile)
        self.assertTrue(report.passed, report.failures)
        self.assertEqual(profile_label(profile), "sinkhorn(n=16, beta=0.6)")
        self.assertGreater(profile.s[15, 15], profile.s[0, 0] + 1e-3)
        self.assertGreater(abs(profile.s[0, 1] - profile.s[14, 15]), 1e-3)
        np.testing.assert_allclose(build_sinkhorn_ramp(16, 0.0).s, build_flat(16).s, atol=1e-14)
        with self.assertRaises(ValueError):
            build_sinkhorn_ramp(16, 1.0)


class ValidationTests(unittest.TestCase):
    def test_asymmetric_profile_reports_symmetry_failure(self) -> None:
        profile = build_explicit([[0.5, 0.5], [0.4, 0.6]])
        report = validate(profile)
        self.assertFalse(report.passed)
        self.assertIn("symmetric", report.failures)
        self.assertNotIn("row_sums", report.failures)

    def test_ensure_valid_lists_failed_checks(self) -> None:
        profile = build_explicit([[0.7, 0.2], [0.2, 0.7]])
        with self.assertRaises(ProfileInvalid) as ctx:
            ensure_valid(profile)
        self.assertIn("row_sums", str(ctx.exception))

    def test_zero_entry_fails_strict_positivity(self) -> None:
        profile = build_explicit([[0.0, 1.0], [1.0, 0.0]])
        report = validate(profile)
        self.assertEqual(report.failures, ["strictly_positive"])


class SqrtProfileTests(unittest.TestCase):
    def test_flat_root_is_the_profile_itself(self) -> None:
        sq = sqrt_profile(build_flat(5))
        np.testing.assert_allclose(sq.s_tilde, np.full((5, 5), 0.2), atol=1e-12)
        self.assertAlmostEqual(sq.bound_constant, 1.0, places=9)
        self.assertTrue(sq.assumption_holds)

    def test_cosine_root_recovers_generator(self) -> None:
        profile = build_cosine_circulant(12, 0.5)
        sq = sqrt_profile(profile)
        np.testing.assert_allclose(sq.s_tilde, cosine_generator(12, 0.5), atol=1e-10)
        np.testing.assert_allclose(sq.s_tilde @ sq.s_tilde, profile.s, atol=1e-8)
        np.testing.assert_allclose(sq.s_tilde.sum(axis=1), np.ones(12), atol=1e-8)

    def test_level_zero_family_resolves_identity(self) -> None:
        for label, profile in (
            ("flat", build_flat(16)),
            ("cosine", build_cosine_circulant(64, 0.5)),
        ):
            with self.subTest(profile=label):
                members = build_m0(sqrt_profile(profile)).members
                total = sum(member.mean * member.matrix for member in members) / profile.n
                np.testing.assert_allclose(total, np.eye(profile.n), atol=1e-8)

    def test_non_psd_profile_raises(self) -> None:
        with self.assertRaises(NotPSD):
            sqrt_profile(build_explicit([[0.0, 1.0], [1.0, 0.0]]))

    def test_negative_root_entry_is_reported(self) -> None:
        profile = build_explicit(NEGATIVE_ROOT_PROFILE)
        self.assertTrue(validate(profile).passed)
        with self.assertRaises(AssumptionViolated) as ctx:
            sqrt_profile(profile)
        i, j, value = ctx.exception.entry
        self.assertEqual(abs(i - j), 2)
        self.assertAlmostEqual(value, -0.02, places=10)

        relaxed = sqrt_profile(profile, strict=False)
        self.assertFalse(relaxed.assumption_holds)
        self.assertEqual(relaxed.bound_constant, float("inf"))
        with self.assertRaises(AssumptionViolated):
            relaxed.require_assumption()


class StabilityTests(unittest.TestCase):
    def test_flat_profile_has_zero_radius(self) -> None:
        op = stability_radius(build_flat(6))
        self.assertAlmostEqual(op.spectral_radius, 0.0, places=12)

    def test_cosine_radius_matches_second_fourier_mode(self) -> None:
        op = stability_radius(build_cosine_circulant(32, 0.5))
        self.assertAlmostEqual(op.spectral_radius, 0.0625, places=12)
        self.assertLessEqual(op.spectral_radius, op.radius_bound + 1e-8)
        ones = np.ones(32)
        self.assertLessEqual(np.linalg.norm(op.c_matrix @ ones), 1e-10 * np.sqrt(32))

    def test_solve_inverts_stability_kernel(self) -> None:
        op = stability_radius(build_cosine_circulant(10, 0.5))
        factor = 0.4 + 0.3j
        rhs = np.cos(2 * np.pi * np.arange(10) / 10).astype(complex)
        solved = stability_solve(op, factor, rhs)
        np.testing.assert_allclose(solved - factor * (op.c_matrix @ solved), rhs, atol=1e-12)

    def test_solve_refuses_near_singular_factor(self) -> None:
        op = stability_radius(build_cosine_circulant(10, 0.5))
        with self.assertRaises(NearSingular):
            stability_solve(op, 16.0, np.ones(10))

    @settings(max_examples=25, deadline=None)
    @given(n=st.integers(min_value=2, max_value=24), seed=st.integers(min_value=0, max_value=2**32 - 1))
    def test_random_mix_profiles_respect_radius_bound(self, n: int, seed: int) -> None:
        profile = random_mix_profile(n, np.random.default_rng(seed))
        self.assertTrue(validate(profile).passed)
        op = stability_radius(profile)
        self.assertLessEqual(op.spectral_radius, op.radius_bound + 1e-8)


class ProfileJsonTests(unittest.TestCase):
    def test_cosine_description_rebuilds_same_profile(self) -> None:
        profile = build_cosine_circulant(8, 0.25)
        payload = profile_to_json(profile)
        self.assertEqual(payload, {"n": 8, "kind": "cosine", "beta": 0.25})
        np.testing.assert_array_equal(profile_from_json(payload).s, profile.s)

    def test_sinkhorn_description_rebuilds_same_profile(self) -> None:
        profile = build_sinkhorn_ramp(6, 0.5)
        payload = profile_to_json(profile)
        self.assertEqual(payload, {"n": 6, "kind": "sinkhorn", "beta": 0.5})
        np.testing.assert_array_equal(profile_from_json(payload).s, profile.s)

    def test_explicit_description_keeps_entries(self) -> None:
        profile = profile_from_json({"n": 2, "kind": "explicit", "entries": [0.5, 0.5, 0.5, 0.5]})
        np.testing.assert_array_equal(profile.s, np.full((2, 2), 0.5))

    def test_invalid_descriptions_raise_config_error(self) -> None:
        bad_payloads = [
            [],
            {"n": 0, "kind": "flat"},
            {"n": 4, "kind": "triangle"},
            {"n": 4, "kind": "cosine"},
            {"n": 4, "kind": "cosine", "beta": 1.5},
            {"n": 4, "kind": "sinkhorn"},
            {"n": 2, "kind": "explicit", "entries": [1.0, 0.0]},
        ]
        for payload in bad_payloads:
            with self.subTest(payload=payload):
                with self.assertRaises(ConfigError):
                    profile_from_json(payload)


if __name__ == "__main__":
    unittest.main()
