from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Literal

import numpy as np
import scipy.linalg

from .errors import AssumptionViolated, ConfigError, NearSingular, NotPSD, ProfileInvalid

logger = logging.getLogger(__name__)

ProfileKind = Literal["flat", "cosine", "sinkhorn", "explicit"]
PROFILE_KINDS: tuple[ProfileKind, ...] = ("flat", "cosine", "sinkhorn", "explicit")

PSD_TOLERANCE = 1e-12
SOLVE_MARGIN = 1e-8
MAX_EXPLICIT_N = 4096


def _frozen_array(values: Any) -> np.ndarray:
    """Copy values into a read-only float64 array."""
    array = np.array(values, dtype=np.float64, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class VarianceProfile:
    n: int
    s: np.ndarray
    kind: ProfileKind = "explicit"
    beta: float | None = None

    def __post_init__(self) -> None:
        s = _frozen_array(self.s)
        if s.shape != (self.n, self.n):
            raise ValueError(f"Profile entries must be {self.n}x{self.n}, got {s.shape}.")
        object.__setattr__(self, "s", s)

    @property
    def c_lower(self) -> float:
        return float(self.n * self.s.min())

    @cached_property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Eigenvalues (ascending) and orthonormal eigenvectors of the symmetrized S."""
        symmetric = 0.5 * (self.s + self.s.T)
        return scipy.linalg.eigh(symmetric, check_finite=False)


@dataclass(frozen=True)
class ValidationTolerances:
    symmetry: float = 1e-12
    row_sum: float = 1e-10
    require_positive: bool = True


@dataclass(frozen=True)
class ValidationReport:
    n: int
    symmetry_defect: float
    row_sum_deviation: float
    max_row_sum: float
    min_entry: float
    checks: dict[str, bool] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.checks.values())

    @property
    def failures(self) -> list[str]:
        return [name for name, ok in self.checks.items() if not ok]


@dataclass(frozen=True, eq=False)
class SqrtProfile:
    s_tilde: np.ndarray
    bound_constant: float
    assumption_holds: bool
    worst_entry: tuple[int, int, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "s_tilde", _frozen_array(self.s_tilde))

    @property
    def n(self) -> int:
        return int(self.s_tilde.shape[0])

    def require_assumption(self) -> None:
        """Raise when some entry of the square root is not strictly positive.

        Raises:
            AssumptionViolated: With the smallest entry attached.
        """
        if not self.assumption_holds:
            i, j, value = self.worst_entry
            raise AssumptionViolated(
                f"Square root of S has non-positive entry s_tilde[{i},{j}] = {value:.3e}.",
                entry=self.worst_entry,
            )


@dataclass(frozen=True, eq=False)
class StabilityOperator:
    c_matrix: np.ndarray
    spectral_radius: float
    c_lower: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "c_matrix", _frozen_array(self.c_matrix))

    @property
    def n(self) -> int:
        return int(self.c_matrix.shape[0])

    @property
    def radius_bound(self) -> float:
        return 1.0 - self.c_lower

    @cached_property
    def spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        return scipy.linalg.eigh(self.c_matrix, check_finite=False)


def build_flat(n: int) -> VarianceProfile:
    """Build the Wigner profile with every variance equal to 1/n.

    Args:
        n: Matrix dimension.

    Returns:
        Flat variance profile.

    Raises:
        ValueError: If `n` is smaller than 1.
    """
    if n < 1:
        raise ValueError("Profile dimension n must be at least 1.")
    return VarianceProfile(n=n, s=np.full((n, n), 1.0 / n), kind="flat")


def cosine_generator(n: int, beta: float) -> np.ndarray:
    """Return the circulant square root B with first row (1 + beta cos(2 pi k/n))/n."""
    k = np.arange(n)
    b = (1.0 + beta * np.cos(2.0 * np.pi * k / n)) / n
    return scipy.linalg.circulant(b)


def build_cosine_circulant(n: int, beta: float) -> VarianceProfile:
    """Build S = B @ B for the cosine circulant B.

    Args:
        n: Matrix dimension, at least 2.
        beta: Cosine amplitude in [0, 1).

    Returns:
        Cosine variance profile whose entries lie in [(1-beta)^2/n, (1+beta)^2/n].

    Raises:
        ValueError: If `beta` is outside [0, 1) or `n` < 2.
    """
    if n < 2:
        raise ValueError("Cosine profile needs n >= 2.")
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"Cosine amplitude beta must lie in [0, 1), got {beta}.")
    b = cosine_generator(n, beta)
    s = b @ b
    return VarianceProfile(n=n, s=0.5 * (s + s.T), kind="cosine", beta=float(beta))


def build_explicit(entries: Any) -> VarianceProfile:
    """Wrap an explicit square matrix of variances without validating it."""
    array = np.asarray(entries, dtype=np.float64)
    if array.ndim != 2 or array.shape[0] != array.shape[1]:
        raise ValueError(f"Explicit profile must be a square matrix, got shape {array.shape}.")
    return VarianceProfile(n=int(array.shape[0]), s=array, kind="explicit")


def build_sinkhorn(kernel: Any, max_iters: int = 1000, tolerance: float = 1e-14) -> VarianceProfile:
    """Scale a positive symmetric kernel to a symmetric doubly stochastic profile.

    Symmetric Sinkhorn iteration `K <- D K D` with `D = diag(rowsum^-1/2)`.

    Args:
        kernel: Positive symmetric n x n matrix.
        max_iters: Iteration cap.
        tolerance: Target max row-sum deviation.

    Returns:
        Explicit profile with row sums 1.
    """
    k = np.asarray(kernel, dtype=np.float64)
    k = 0.5 * (k + k.T)
    if np.any(k <= 0):
        raise ValueError("Sinkhorn kernel must have strictly positive entries.")
    error = np.inf
    for _ in range(max_iters):
        row_sums = k.sum(axis=1)
        error = float(np.max(np.abs(row_sums - 1.0)))
        if error < tolerance:
            break
        d = 1.0 / np.sqrt(row_sums)
        k = d[:, None] * k * d[None, :]
    logger.debug("Sinkhorn scaling finished with row-sum error %.3e", error)
    return VarianceProfile(n=int(k.shape[0]), s=0.5 * (k + k.T), kind="explicit")


def build_sinkhorn_ramp(n: int, beta: float) -> VarianceProfile:
    """Sinkhorn-balance the kernel 1 + beta x_i x_j with x_i = (i + 1/2) / n.

    Unlike the cosine circulant this profile is not translation invariant;
    the largest variances sit in the bottom-right corner.

    Raises:
        ValueError: If `beta` is outside [0, 1) or `n` < 2.
    """
    if n < 2:
        raise ValueError("Sinkhorn profile needs n >= 2.")
    if not 0.0 <= beta < 1.0:
        raise ValueError(f"Sinkhorn kernel amplitude beta must lie in [0, 1), got {beta}.")
    x = (np.arange(n) + 0.5) / n
    kernel = 1.0 + beta * np.outer(x, x)
    return replace(build_sinkhorn(kernel), kind="sinkhorn", beta=float(beta))


def random_mix_profile(n: int, rng: np.random.Generator) -> VarianceProfile:
    """Draw a convex mix of the flat profile and a cosine profile.

    Args:
        n: Matrix dimension, at least 2.
        rng: Generator supplying the mixing weight and cosine amplitude.

    Returns:
        Explicit profile `t * flat + (1 - t) * cosine(beta)`.
    """
    weight = float(rng.uniform(0.0, 1.0))
    beta = float(rng.uniform(0.0, 0.95))
    s = weight * build_flat(n).s + (1.0 - weight) * build_cosine_circulant(n, beta).s
    return VarianceProfile(n=n, s=s, kind="explicit")


def validate(
    profile: VarianceProfile,
    tolerances: ValidationTolerances | None = None,
) -> ValidationReport:
    """Check symmetry, row normalization and positivity of a profile.

    Args:
        profile: Profile to inspect.
        tolerances: Check thresholds; defaults to the library tolerances.

    Returns:
        Report carrying the measured defects and one flag per invariant.
    """
    tol = tolerances or ValidationTolerances()
    s = profile.s
    row_sums = s.sum(axis=1)
    symmetry_defect = float(np.max(np.abs(s - s.T))) if profile.n else 0.0
    row_sum_deviation = float(np.max(np.abs(row_sums - 1.0)))
    min_entry = float(s.min())
    checks = {
        "symmetric": symmetry_defect <= tol.symmetry,
        "row_sums": row_sum_deviation <= tol.row_sum,
        "nonnegative": min_entry >= 0.0,
    }
    if tol.require_positive:
        checks["strictly_positive"] = min_entry > 0.0
    return ValidationReport(
        n=profile.n,
        symmetry_defect=symmetry_defect,
        row_sum_deviation=row_sum_deviation,
        max_row_sum=float(row_sums.max()),
        min_entry=min_entry,
        checks=checks,
    )


def ensure_valid(profile: VarianceProfile, tolerances: ValidationTolerances | None = None) -> None:
    """Raise when the profile fails validation.

    Raises:
        ProfileInvalid: Listing the failed checks.
    """
    report = validate(profile, tolerances)
    if not report.passed:
        raise ProfileInvalid(
            f"Variance profile failed validation ({', '.join(report.failures)}); "
            f"max row sum {report.max_row_sum:.12g}, min entry {report.min_entry:.3e}."
        )


def sqrt_profile(profile: VarianceProfile, strict: bool = True) -> SqrtProfile:
    """Compute the principal square root of S by spectral decomposition.

    Eigenvalues of magnitude below 1e-12 are treated as zero.

    Args:
        profile: Symmetric positive semidefinite profile.
        strict: Raise `AssumptionViolated` when the root has a non-positive
            entry; otherwise return it with `assumption_holds=False`.

    Returns:
        Square root together with its entry-bound constant C.

    Raises:
        NotPSD: If S has an eigenvalue below -1e-12.
        AssumptionViolated: If `strict` and some entry of the root is <= 0.
    """
    eigenvalues, vectors = profile.spectrum
    if eigenvalues.size and eigenvalues[0] < -PSD_TOLERANCE:
        raise NotPSD(f"Variance profile has eigenvalue {eigenvalues[0]:.3e} below -{PSD_TOLERANCE:g}.")
    roots = np.sqrt(np.where(eigenvalues < PSD_TOLERANCE, 0.0, eigenvalues))
    s_tilde = (vectors * roots) @ vectors.T
    s_tilde = 0.5 * (s_tilde + s_tilde.T)

    n = profile.n
    flat_index = int(np.argmin(s_tilde))
    i, j = divmod(flat_index, n)
    smallest = float(s_tilde[i, j])
    holds = smallest > 0.0
    if holds:
        bound_constant = max(1.0, n * float(s_tilde.max()), 1.0 / (n * smallest))
    else:
        bound_constant = float("inf")
    sq = SqrtProfile(
        s_tilde=s_tilde,
        bound_constant=bound_constant,
        assumption_holds=holds,
        worst_entry=(i, j, smallest),
    )
    if strict:
        sq.require_assumption()
    return sq


def stability_radius(profile: VarianceProfile) -> StabilityOperator:
    """Build C = S - 11^T/n and its spectral radius.

    Args:
        profile: Validated profile.

    Returns:
        Stability operator; its radius is at most 1 - c_lower for valid profiles.
    """
    n = profile.n
    c_matrix = profile.s - 1.0 / n
    c_matrix = 0.5 * (c_matrix + c_matrix.T)
    eigenvalues = scipy.linalg.eigvalsh(c_matrix, check_finite=False)
    radius = float(np.max(np.abs(eigenvalues))) if n else 0.0
    op = StabilityOperator(c_matrix=c_matrix, spectral_radius=radius, c_lower=profile.c_lower)
    if radius > op.radius_bound + 1e-8:
        logger.warning(
            "Stability radius %.6g exceeds 1 - c_lower = %.6g; profile is not a valid generalized Wigner profile.",
            radius,
            op.radius_bound,
        )
    return op


def stability_solve(op: StabilityOperator, factor: complex, rhs: Any) -> np.ndarray:
    """Solve (I - factor * C) x = rhs.

    Args:
        op: Stability operator with cached eigendecomposition.
        factor: Complex scalar, typically m(z1) m(z2).
        rhs: Length-n complex vector.

    Returns:
        Solution vector.

    Raises:
        NearSingular: If |factor| * radius >= 1 - 1e-8.
    """
    if abs(factor) * op.spectral_radius >= 1.0 - SOLVE_MARGIN:
        raise NearSingular(
            f"|factor| * radius = {abs(factor) * op.spectral_radius:.12g} is not below 1 - {SOLVE_MARGIN:g}."
        )
    vector = np.asarray(rhs, dtype=np.complex128)
    if vector.shape != (op.n,):
        raise ValueError(f"Right-hand side must have length {op.n}, got shape {vector.shape}.")
    eigenvalues, vectors = op.spectrum
    coefficients = vectors.T @ vector
    return vectors @ (coefficients / (1.0 - factor * eigenvalues))


def profile_to_json(profile: VarianceProfile) -> dict[str, Any]:
    """Serialize a profile to its JSON description."""
    payload: dict[str, Any] = {"n": profile.n, "kind": profile.kind}
    if profile.kind in ("cosine", "sinkhorn"):
        payload["beta"] = profile.beta
    if profile.kind == "explicit":
        payload["entries"] = profile.s.reshape(-1).tolist()
    return payload


def profile_from_json(payload: Any) -> VarianceProfile:
    """Rebuild a profile from its JSON description.

    Args:
        payload: Mapping with `n`, `kind` and, depending on kind, `beta` or
            row-major `entries`.

    Returns:
        Reconstructed profile.

    Raises:
        ConfigError: If the payload shape is invalid.
    """
    if not isinstance(payload, dict):
        raise ConfigError("Profile description must be a JSON object.")
    n = payload.get("n")
    kind = payload.get("kind")
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ConfigError(f"Profile 'n' must be a positive integer, got {n!r}.")
    if kind not in PROFILE_KINDS:
        raise ConfigError(f"Profile 'kind' must be one of {', '.join(PROFILE_KINDS)}, got {kind!r}.")
    try:
        if kind == "flat":
            return build_flat(n)
        if kind in ("cosine", "sinkhorn"):
            beta = payload.get("beta")
            if isinstance(beta, bool) or not isinstance(beta, (int, float)):
                raise ConfigError(f"{kind.capitalize()} profile needs numeric 'beta', got {beta!r}.")
            builder = build_cosine_circulant if kind == "cosine" else build_sinkhorn_ramp
            return builder(n, float(beta))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc

    if n > MAX_EXPLICIT_N:
        raise ConfigError(f"Explicit profiles are limited to n <= {MAX_EXPLICIT_N}, got {n}.")
    entries = payload.get("entries")
    if not isinstance(entries, list) or len(entries) != n * n:
        raise ConfigError(f"Explicit profile needs {n * n} row-major 'entries'.")
    return VarianceProfile(n=n, s=np.asarray(entries, dtype=np.float64).reshape(n, n), kind="explicit")


def profile_label(profile: VarianceProfile) -> str:
    """Short human label used in run headers and records."""
    if profile.kind in ("cosine", "sinkhorn"):
        return f"{profile.kind}(n={profile.n}, beta={profile.beta:g})"
    return f"{profile.kind}(n={profile.n})"
