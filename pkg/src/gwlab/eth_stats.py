from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .observables import Observable, ObservableFamily, traceless
from .resolvent_traces import OverlapMatrix, ResolventSpec, overlap, trace_two
from .spectral import SpectralDecomposition, SpectralPoint, classical_locations, stieltjes_m, window_eta

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class WindowSpec:
    i0: int
    j0: int
    j_width: int

    def __post_init__(self) -> None:
        if self.i0 < 1 or self.j0 < 1:
            raise ValueError(f"Window centers are 1-based, got ({self.i0}, {self.j0}).")
        if self.j_width < 1:
            raise ValueError(f"Window size J must be at least 1, got {self.j_width}.")


@dataclass(frozen=True)
class XiStatistic:
    value: float
    argmax_window: WindowSpec
    conjugated: bool = False


@dataclass(frozen=True)
class LambdaEstimate:
    k: int
    value: float
    families_sampled: bool = False


def window_width(n: int, exponent: float) -> int:
    """J = N^exponent rounded to the nearest integer, at least 1."""
    return max(1, int(round(float(n) ** exponent)))


def _prefix_table(o: OverlapMatrix) -> np.ndarray:
    squared = np.abs(o.entries) ** 2
    table = np.zeros((o.n + 1, o.n + 1))
    table[1:, 1:] = squared.cumsum(axis=0).cumsum(axis=1)
    return table


def _window_sums(table: np.ndarray, n: int, j_width: int) -> np.ndarray:
    centers = np.arange(1, n + 1)
    lo = np.clip(centers - j_width, 1, n) - 1
    hi = np.clip(centers + j_width, 1, n)
    rows_hi, rows_lo = hi[:, None], lo[:, None]
    cols_hi, cols_lo = hi[None, :], lo[None, :]
    return table[rows_hi, cols_hi] - table[rows_lo, cols_hi] - table[rows_hi, cols_lo] + table[rows_lo, cols_lo]


def window_sum(o: OverlapMatrix, window: WindowSpec) -> float:
    """Sum of |O_ij|^2 over the window clipped to [1, n] in both indices."""
    n = o.n
    if window.i0 > n or window.j0 > n:
        raise ValueError(f"Window center ({window.i0}, {window.j0}) lies outside [1, {n}].")
    i_lo, i_hi = max(window.i0 - window.j_width, 1), min(window.i0 + window.j_width, n)
    j_lo, j_hi = max(window.j0 - window.j_width, 1), min(window.j0 + window.j_width, n)
    block = o.entries[i_lo - 1 : i_hi, j_lo - 1 : j_hi]
    return float(np.sum(np.abs(block) ** 2))


def xi(o: OverlapMatrix, j_width: int) -> XiStatistic:
    """Windowed overlap statistic N/(2J)^2 max_{i0,j0} sum_{|i-i0|<=J, |j-j0|<=J} |O_ij|^2.

    Windows near the spectral edges are clipped to [1, n] while the (2J)^2
    normalization is kept. All centers are scanned through a 2D prefix-sum
    table; ties go to the lexicographically smallest (i0, j0).

    Args:
        o: Overlap matrix, plain or conjugated.
        j_width: Window half-width J >= 1.

    Returns:
        Statistic value with its maximizing window.
    """
    if j_width < 1:
        raise ValueError(f"Window size J must be at least 1, got {j_width}.")
    n = o.n
    sums = _window_sums(_prefix_table(o), n, j_width)
    flat_index = int(np.argmax(sums))
    i0, j0 = divmod(flat_index, n)
    value = n / (2.0 * j_width) ** 2 * float(sums[i0, j0])
    return XiStatistic(value=value, argmax_window=WindowSpec(i0 + 1, j0 + 1, j_width), conjugated=o.conjugated)


def eth_max(o: OverlapMatrix, a_mean: complex) -> float:
    """max_ij |O_ij - delta_ij <A>|."""
    if o.n == 0:
        return 0.0
    centred = o.entries - a_mean * np.eye(o.n)
    return float(np.max(np.abs(centred)))


def eth_pair_max(decomp: SpectralDecomposition, a: Observable) -> float:
    """max_ij |<u_i, A u_j> - delta_ij <A>| + max_ij |<u_i, A conj(u_j)>|."""
    plain = overlap(decomp, a)
    conjugated = overlap(decomp, a, conjugated=True)
    return eth_max(plain, a.mean) + float(np.max(np.abs(conjugated.entries)))


def lambda_k(
    decomp: SpectralDecomposition,
    families: Sequence[ObservableFamily],
    j_width: int,
) -> LambdaEstimate:
    """max over traceless members of Xi + max over raw members of conjugated Xi + 1.

    The last family in `families` sets the level k; subsampled families are
    flagged and the value is then a lower bound for the full family.
    """
    if not families:
        raise ValueError("lambda_k needs at least one observable family.")
    family = families[-1]
    best_plain = 0.0
    best_conj = 0.0
    for member in family.members:
        best_plain = max(best_plain, xi(overlap(decomp, traceless(member)), j_width).value)
        best_conj = max(best_conj, xi(overlap(decomp, member, conjugated=True), j_width).value)
    sampled = any(fam.sampled for fam in families)
    logger.debug("Lambda_%d: xi=%.6g xi_bar=%.6g sampled=%s", family.level, best_plain, best_conj, sampled)
    return LambdaEstimate(k=family.level, value=best_plain + best_conj + 1.0, families_sampled=sampled)


def bridge_points(n: int, i0: int, j0: int, j_width: int) -> tuple[SpectralPoint, SpectralPoint]:
    """Spectral points at gamma_{i0} and gamma_{j0} whose eta solves N eta rho = J.

    Raises:
        ValueError: If a center lies outside [1, n].
        NoSolution: If a window eta cannot be bracketed.
    """
    if not (1 <= i0 <= n and 1 <= j0 <= n):
        raise ValueError(f"Bridge centers ({i0}, {j0}) must lie in [1, {n}].")
    gammas = classical_locations(n).gammas
    points = []
    for center in (i0, j0):
        energy = float(gammas[center - 1])
        points.append(stieltjes_m(complex(energy, window_eta(energy, j_width, n)), n=n))
    return points[0], points[1]


def bridge_ratio(
    decomp: SpectralDecomposition,
    a: Observable,
    i0: int,
    j0: int,
    j_width: int,
    conjugated: bool = False,
) -> float:
    """Compare a two-resolvent Im-trace with the matching windowed overlap sum.

    Energies sit at the classical locations gamma_{i0}, gamma_{j0} and each
    eta solves N eta rho = J. The numerator is
    <Im G1 A Im G2 A^*> / (rho1 rho2), with G2 transposed when `conjugated`
    so that the window sum runs over conjugated overlaps.

    Args:
        decomp: Eigensystem of the sample.
        a: Observable.
        i0: 1-based row center.
        j0: 1-based column center.
        j_width: Window half-width J.
        conjugated: Use the conjugated overlap and transposed second resolvent.

    Returns:
        Trace side divided by (N/(2J)^2) times the window sum.

    Raises:
        NoSolution: If a window eta cannot be bracketed.
    """
    n = decomp.n
    p1, p2 = bridge_points(n, i0, j0, j_width)
    z1, z2 = p1.z, p2.z
    rho1, rho2 = p1.rho, p2.rho

    first = ResolventSpec(z1, "imag")
    if conjugated:
        # Im(G^t)(z) = (G^t(z) - G^t(conj z)) / (2i)
        trace = (
            trace_two(decomp, a, a.adjoint, first, ResolventSpec(z2, "transpose"))
            - trace_two(decomp, a, a.adjoint, first, ResolventSpec(z2.conjugate(), "transpose"))
        ) / 2j
    else:
        trace = trace_two(decomp, a, a.adjoint, first, ResolventSpec(z2, "imag"))
    trace_side = trace.real / (rho1 * rho2)

    window = WindowSpec(i0, j0, j_width)
    o = overlap(decomp, a, conjugated=conjugated)
    window_side = n / (2.0 * j_width) ** 2 * window_sum(o, window)
    if window_side == 0.0:
        return float("inf") if trace_side > 0.0 else 1.0
    return float(trace_side / window_side)
