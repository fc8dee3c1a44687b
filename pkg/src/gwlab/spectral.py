from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.integrate import quad
from scipy.optimize import brentq

from .ensemble import WignerSample
from .errors import ConvergenceFailure, NoSolution

logger = logging.getLogger(__name__)

QUAD_LIMIT = 500
BISECTION_STEPS = 64


@dataclass(frozen=True)
class SpectralPoint:
    z: complex
    m: complex
    rho: float
    ell: float

    @property
    def eta(self) -> float:
        return abs(self.z.imag)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    lambdas: np.ndarray
    vectors: np.ndarray

    @property
    def n(self) -> int:
        return int(self.lambdas.shape[0])


@dataclass(frozen=True, eq=False)
class ClassicalLocations:
    gammas: np.ndarray

    @property
    def n(self) -> int:
        return int(self.gammas.shape[0])


def semicircle_density(x: float | np.ndarray) -> float | np.ndarray:
    """rho_sc(x) = sqrt(4 - x^2) / (2 pi) on [-2, 2], zero outside."""
    x = np.asarray(x, dtype=np.float64)
    return np.sqrt(np.clip(4.0 - x * x, 0.0, None)) / (2.0 * np.pi)


def semicircle_cdf(x: float | np.ndarray) -> np.ndarray:
    """Closed-form semicircle distribution function."""
    x = np.clip(np.asarray(x, dtype=np.float64), -2.0, 2.0)
    return 0.5 + x * np.sqrt(4.0 - x * x) / (4.0 * np.pi) + np.arcsin(x / 2.0) / np.pi


def stieltjes_m(z: complex, n: int | None = None) -> SpectralPoint:
    """Semicircle Stieltjes transform, the root of m^2 + z m + 1 = 0 with Im m * Im z > 0.

    Uses `m = (-z + sqrt(z - 2) sqrt(z + 2)) / 2` with principal square
    roots, which picks that root in both half planes and satisfies
    m(conj z) = conj m(z).

    Args:
        z: Spectral parameter off the real axis.
        n: Matrix dimension used for `ell = n * eta * rho`; 0 when omitted.

    Returns:
        Spectral point with m, rho = Im m and ell.

    Raises:
        ValueError: If `z` is real.
    """
    z = complex(z)
    if z.imag == 0.0:
        raise ValueError(f"Stieltjes transform needs Im z != 0, got z = {z}.")
    root = np.sqrt(z - 2.0) * np.sqrt(z + 2.0)
    m = complex((-z + root) / 2.0)
    rho = m.imag
    ell = float(n) * abs(z.imag) * rho if n else 0.0
    return SpectralPoint(z=z, m=m, rho=rho, ell=ell)


def rho_integral(energy: float, eta: float) -> float:
    """Im m(E + i eta) from its integral representation against the semicircle.

    The Lorentzian peak is handled by subtracting rho_sc(E) times the
    closed-form Lorentzian mass and integrating the smooth remainder.

    Args:
        energy: Real part E.
        eta: Positive imaginary part.

    Returns:
        Integral of eta rho_sc(x) / ((x - E)^2 + eta^2) over [-2, 2].

    Raises:
        ValueError: If `eta` is not positive.
    """
    if eta <= 0.0:
        raise ValueError(f"eta must be positive, got {eta}.")
    center = float(semicircle_density(energy))

    def remainder(x: float) -> float:
        return (float(semicircle_density(x)) - center) * eta / ((x - energy) ** 2 + eta**2)

    breakpoints = [p for p in (energy - eta, energy, energy + eta) if -2.0 < p < 2.0]
    value, _ = quad(remainder, -2.0, 2.0, points=breakpoints or None, limit=QUAD_LIMIT, epsabs=1e-13, epsrel=1e-12)
    lorentz_mass = math.atan((2.0 - energy) / eta) + math.atan((2.0 + energy) / eta)
    return center * lorentz_mass + value


def classical_locations(n: int) -> ClassicalLocations:
    """Quantiles gamma_i with n * mass([gamma_i, 2]) = i - 1/2, in decreasing order.

    Args:
        n: Matrix dimension.

    Returns:
        Strictly decreasing locations inside (-2, 2).
    """
    if n < 1:
        raise ValueError("Dimension n must be at least 1.")
    targets = 1.0 - (np.arange(1, n + 1) - 0.5) / n
    lo = np.full(n, -2.0)
    hi = np.full(n, 2.0)
    for _ in range(BISECTION_STEPS):
        mid = 0.5 * (lo + hi)
        below = semicircle_cdf(mid) < targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    gammas = 0.5 * (lo + hi)
    gammas.setflags(write=False)
    return ClassicalLocations(gammas=gammas)


def window_eta(energy: float, j_width: float, n: int) -> float:
    """Solve n * eta * Im m(E + i eta) = J for eta.

    Args:
        energy: Energy inside (-2, 2).
        j_width: Target window size J, at most n.
        n: Matrix dimension.

    Returns:
        eta with |n eta rho - J| <= 1e-8 J.

    Raises:
        ValueError: If |E| >= 2 or J is not in (0, n].
        NoSolution: If [n^-2, n] does not bracket J.
    """
    if abs(energy) >= 2.0:
        raise ValueError(f"Window energy must satisfy |E| < 2, got {energy}.")
    if not 0.0 < j_width <= n:
        raise ValueError(f"Window size J must lie in (0, n], got J={j_width}, n={n}.")

    def excess(eta: float) -> float:
        return n * eta * stieltjes_m(complex(energy, eta)).rho - j_width

    lo, hi = float(n) ** -2, float(n)
    f_lo, f_hi = excess(lo), excess(hi)
    if f_lo > 0.0 or f_hi < 0.0:
        raise NoSolution(
            f"Bracket [{lo:.3e}, {hi:.3e}] does not straddle J={j_width} at E={energy} "
            f"(values {f_lo + j_width:.6g}, {f_hi + j_width:.6g})."
        )
    eta = brentq(excess, lo, hi, xtol=1e-300, rtol=4.0 * np.finfo(float).eps, maxiter=500)
    logger.debug("window_eta(E=%g, J=%g, n=%d) = %.12g", energy, j_width, n, eta)
    return float(eta)


def decompose(sample: WignerSample | np.ndarray) -> SpectralDecomposition:
    """Full eigensystem of a Hermitian matrix, eigenvalues in decreasing order.

    Args:
        sample: Wigner sample or a raw Hermitian matrix.

    Returns:
        Eigenvalues lambda_1 >= ... >= lambda_N with matching unit eigenvectors as columns.

    Raises:
        ConvergenceFailure: If the eigensolver does not converge.
    """
    matrix = sample.w if isinstance(sample, WignerSample) else np.asarray(sample)
    try:
        values, vectors = scipy.linalg.eigh(matrix, check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise ConvergenceFailure(f"Eigensolver failed on a {matrix.shape[0]}x{matrix.shape[0]} matrix: {exc}") from exc
    lambdas = np.ascontiguousarray(values[::-1])
    ordered = np.ascontiguousarray(vectors[:, ::-1]).astype(np.complex128, copy=False)
    lambdas.setflags(write=False)
    ordered.setflags(write=False)
    return SpectralDecomposition(lambdas=lambdas, vectors=ordered)


def rigidity_scale(index: np.ndarray | int, n: int) -> np.ndarray:
    """min(i, N - i + 1)^(-1/3) N^(-2/3) for 1-based indices."""
    i = np.asarray(index, dtype=np.float64)
    return np.minimum(i, n - i + 1.0) ** (-1.0 / 3.0) * float(n) ** (-2.0 / 3.0)


def rigidity_excess(decomp: SpectralDecomposition, gammas: ClassicalLocations) -> float:
    """Largest eigenvalue deviation from its classical location in rigidity units.

    Args:
        decomp: Spectral decomposition of a sample.
        gammas: Classical locations for the same dimension.

    Returns:
        max_i |lambda_i - gamma_i| / (min(i, N-i+1)^(-1/3) N^(-2/3)).
    """
    if decomp.n != gammas.n:
        raise ValueError(f"Dimension mismatch: decomposition n={decomp.n}, locations n={gammas.n}.")
    scale = rigidity_scale(np.arange(1, decomp.n + 1), decomp.n)
    return float(np.max(np.abs(decomp.lambdas - gammas.gammas) / scale))


def pair_control(p1: SpectralPoint, p2: SpectralPoint) -> tuple[float, float]:
    """Return `(L, eta_star)` for a pair of spectral points.

    L = min(N eta_i rho_i) over the pair only; both points must carry `ell`.
    """
    return min(p1.ell, p2.ell), min(p1.eta, p2.eta)
