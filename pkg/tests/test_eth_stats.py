from __future__ import annotations

import math
import unittest
from pathlib import Path

import sys

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

ROOT = Path(__file__).resolve().parents[1]
sys.path.insert(0, str(ROOT / "src"))

from gwlab.ensemble import SampleSpec, sample
from gwlab.eth_stats import (
    WindowSpec,
    bridge_points,
    bridge_ratio,
    eth_max,
    eth_pair_max,
    lambda_k,
    window_sum,
    window_width,
    xi,
)
from gwlab.observables import Observable, alternating, build_hierarchy, identity
from gwlab.resolvent_traces import OverlapMatrix, overlap
from gwlab.spectral import SpectralDecomposition, decompose, pair_control
from gwlab.variance_profile import build_cosine_circulant, build_flat, sqrt_profile


def dyadic_overlap(n: int, seed: int) -> OverlapMatrix:
    """Entries (a + ib)/8 with small integers, so squared window sums are exact."""
    rng = np.random.default_rng(seed)
    entries = (rng.integers(-8, 9, size=(n, n)) + 1j * rng.integers(-8, 9, size=(n, n))) / 8.0
    return OverlapMatrix(entries=entries)


def brute_force_xi(o: OverlapMatrix, j_width: int) -> tuple[float, tuple[int, int]]:
    best, where = -1.0, (0, 0)
    for i0 in range(1, o.n + 1):
        for j0 in range(1, o.n + 1):
            total = window_sum(o, WindowSpec(i0, j0, j_width))
            if total > best:
                best, where = total, (i0, j0)
    return o.n / (2.0 * j_width) ** 2 * best, where


def _decomp(n: int, seed: int, beta: float | None = None):
    profile = build_flat(n) if beta is None else build_cosine_circulant(n, beta)
    return decompose(sample(SampleSpec(profile, seed=seed)))


class WindowTests(unittest.TestCase):
    def test_window_width_rounds_and_floors_at_one(self) -> None:
        self.assertEqual(window_width(100, 0.5), 10)
        self.assertEqual(window_width(512, 0.3), 6)
        self.assertEqual(window_width(1, 0.3), 1)

    def test_window_spec_validation(self) -> None:
        with self.assertRaises(ValueError):
            WindowSpec(0, 1, 1)
        with self.assertRaises(ValueError):
            WindowSpec(1, 1, 0)

    def test_window_sum_clips_at_edges(self) -> None:
        o = OverlapMatrix(entries=np.ones((5, 5)))
        self.assertEqual(window_sum(o, WindowSpec(1, 1, 2)), 9.0)
        self.assertEqual(window_sum(o, WindowSpec(3, 3, 1)), 9.0)
        self.assertEqual(window_sum(o, WindowSpec(3, 3, 10)), 25.0)
        with self.assertRaises(ValueError):
            window_sum(o, WindowSpec(6, 1, 1))


class XiTests(unittest.TestCase):
    def test_prefix_sums_equal_brute_force_at_n64(self) -> None:
        o = dyadic_overlap(64, seed=1)
        for j_width in (1, 3, 8):
            with self.subTest(j_width=j_width):
                statistic = xi(o, j_width)
                value, where = brute_force_xi(o, j_width)
                self.assertEqual(statistic.value, value)
                self.assertEqual((statistic.argmax_window.i0, statistic.argmax_window.j0), where)

    @settings(max_examples=40, deadline=None)
    @given(
        n=st.integers(min_value=1, max_value=16),
        j_width=st.integers(min_value=1, max_value=18),
        seed=st.integers(min_value=0, max_value=10_000),
    )
    def test_prefix_sums_equal_brute_force(self, n: int, j_width: int, seed: int) -> None:
        o = dyadic_overlap(n, seed)
        statistic = xi(o, j_width)
        value, where = brute_force_xi(o, j_width)
        self.assertEqual(statistic.value, value)
        self.assertEqual((statistic.argmax_window.i0, statistic.argmax_window.j0), where)

    def test_ties_pick_smallest_window_center(self) -> None:
        o = OverlapMatrix(entries=np.full((6, 6), 1.0 / math.sqrt(6)))
        statistic = xi(o, 1)
        self.assertEqual((statistic.argmax_window.i0, statistic.argmax_window.j0), (2, 2))
        self.assertAlmostEqual(statistic.value, 9.0 / 4.0, places=12)

    def test_rejects_empty_window(self) -> None:
        with self.assertRaises(ValueError):
            xi(dyadic_overlap(4, 0), 0)

    @settings(max_examples=40, deadline=None)
    @given(
        n=st.integers(min_value=1, max_value=12),
        i0=st.integers(min_value=1, max_value=12),
        j0=st.integers(min_value=1, max_value=12),
        j_width=st.integers(min_value=1, max_value=12),
        seed=st.integers(min_value=0, max_value=10_000),
    )
    def test_window_sum_grows_with_width(self, n: int, i0: int, j0: int, j_width: int, seed: int) -> None:
        o = dyadic_overlap(n, seed)
        center = (min(i0, n), min(j0, n))
        narrow = window_sum(o, WindowSpec(*center, j_width))
        wide = window_sum(o, WindowSpec(*center, j_width + 1))
        self.assertGreaterEqual(wide, narrow)

    def test_eigenvector_phases_do_not_change_xi(self) -> None:
        n = 24
        decomp = _decomp(n, seed=6, beta=0.5)
        phases = np.exp(2j * np.pi * np.random.default_rng(6).random(n))
        rotated = SpectralDecomposition(lambdas=decomp.lambdas, vectors=decomp.vectors * phases[None, :])
        a = alternating(n)
        for conjugated in (False, True):
            with self.subTest(conjugated=conjugated):
                before = xi(overlap(decomp, a, conjugated=conjugated), 3)
                after = xi(overlap(rotated, a, conjugated=conjugated), 3)
                self.assertAlmostEqual(after.value, before.value, places=12)

    def test_scaling_the_observable_scales_xi_quadratically(self) -> None:
        n = 20
        decomp = _decomp(n, seed=7)
        a = alternating(n)
        c = 2.0 - 1.0j
        scaled = Observable(c * a.matrix, traceless=True)
        for conjugated in (False, True):
            with self.subTest(conjugated=conjugated):
                base = xi(overlap(decomp, a, conjugated=conjugated), 2).value
                value = xi(overlap(decomp, scaled, conjugated=conjugated), 2).value
                self.assertAlmostEqual(value, abs(c) ** 2 * base, places=10)

    def test_conjugated_flag_is_carried(self) -> None:
        decomp = _decomp(10, seed=2)
        self.assertTrue(xi(overlap(decomp, alternating(10), conjugated=True), 2).conjugated)


class EthTests(unittest.TestCase):
    def test_identity_has_no_off_diagonal_overlap(self) -> None:
        decomp = _decomp(20, seed=3)
        self.assertLess(eth_max(overlap(decomp, identity(20)), 1.0), 1e-12)

    def test_eth_statistic_is_of_order_inverse_root_n(self) -> None:
        n = 256
        decomp = _decomp(n, seed=4, beta=0.5)
        a = alternating(n)
        statistic = eth_max(overlap(decomp, a), a.mean)
        self.assertLess(math.sqrt(n) * statistic, 30.0)
        self.assertGreaterEqual(eth_pair_max(decomp, a), statistic)


class LambdaTests(unittest.TestCase):
    def test_lambda_uses_last_family(self) -> None:
        n = 24
        decomp = _decomp(n, seed=5, beta=0.5)
        sq = sqrt_profile(build_cosine_circulant(n, 0.5))
        families = build_hierarchy(sq, alternating(n), depth=2, max_members=6)
        estimate = lambda_k(decomp, families, j_width=2)
        self.assertEqual(estimate.k, 2)
        self.assertTrue(estimate.families_sampled)
        self.assertGreaterEqual(estimate.value, 1.0)

        level_one = lambda_k(decomp, families[:2], j_width=2)
        self.assertEqual(level_one.k, 1)
        self.assertFalse(level_one.families_sampled)

    def test_lambda_needs_families(self) -> None:
        with self.assertRaises(ValueError):
            lambda_k(_decomp(4, seed=6), [], j_width=1)


class BridgeTests(unittest.TestCase):
    def test_bulk_ratio_is_order_one(self) -> None:
        n = 300
        decomp = _decomp(n, seed=7, beta=0.5)
        a = alternating(n)
        j_width = window_width(n, 0.3)
        center = (n + 1) // 2
        for conjugated in (False, True):
            with self.subTest(conjugated=conjugated):
                ratio = bridge_ratio(decomp, a, center, center, j_width, conjugated=conjugated)
                self.assertGreaterEqual(ratio, 0.01)
                self.assertLessEqual(ratio, 100.0)

    def test_window_points_have_local_size_j(self) -> None:
        n, j_width = 200, 5
        p1, p2 = bridge_points(n, 40, 120, j_width)
        for point in (p1, p2):
            self.assertAlmostEqual(point.ell / j_width, 1.0, places=7)
        ell, eta_star = pair_control(p1, p2)
        self.assertAlmostEqual(ell / j_width, 1.0, places=7)
        self.assertEqual(eta_star, min(p1.eta, p2.eta))
        self.assertGreater(p1.z.real, p2.z.real)

    def test_centers_must_be_in_range(self) -> None:
        decomp = _decomp(8, seed=8)
        with self.assertRaises(ValueError):
            bridge_ratio(decomp, alternating(8), 0, 4, 1)
        with self.assertRaises(ValueError):
            bridge_ratio(decomp, alternating(8), 4, 9, 1)


if __name__ == "__main__":
    unittest.main()
