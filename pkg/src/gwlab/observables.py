from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np
import scipy.linalg

from .errors import ConfigError
from .variance_profile import SqrtProfile

logger = logging.getLogger(__name__)

TRACELESS_TOLERANCE = 1e-12
HERMITIAN_TOLERANCE = 1e-10
NORM_SLACK = 1e-12
DEFAULT_MAX_MEMBERS = 64
MAX_LEVEL = 6

OBSERVABLE_KINDS = ("alternating", "gue", "rank1", "fourier", "level0", "explicit")


@dataclass(frozen=True, eq=False)
class Observable:
    matrix: np.ndarray
    traceless: bool = False
    op_norm_bound: float = float("nan")
    label: str = ""

    def __post_init__(self) -> None:
        matrix = np.array(self.matrix, dtype=np.complex128, copy=True)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise ValueError(f"Observable must be a square matrix, got shape {matrix.shape}.")
        matrix.setflags(write=False)
        object.__setattr__(self, "matrix", matrix)
        if np.isnan(self.op_norm_bound):
            object.__setattr__(self, "op_norm_bound", spectral_norm(matrix))

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    @cached_property
    def is_diagonal(self) -> bool:
        return not np.any(self.matrix[~np.eye(self.n, dtype=bool)])

    @property
    def mean(self) -> complex:
        return normalized_trace(self.matrix)

    @property
    def adjoint(self) -> Observable:
        return Observable(self.matrix.conj().T, self.traceless, self.op_norm_bound, f"{self.label}*")


@dataclass(frozen=True)
class ObservableFamily:
    level: int
    members: tuple[Observable, ...] = field(default_factory=tuple)
    sampled: bool = False

    def __len__(self) -> int:
        return len(self.members)

    @property
    def max_bound(self) -> float:
        return max((member.op_norm_bound for member in self.members), default=0.0)


def normalized_trace(matrix: np.ndarray) -> complex:
    """<B> = tr(B) / n."""
    return complex(np.trace(matrix) / matrix.shape[0])


def spectral_norm(matrix: np.ndarray) -> float:
    """Operator 2-norm, exact for diagonal matrices and via singular values otherwise."""
    n = matrix.shape[0]
    if n == 0:
        return 0.0
    if not np.any(matrix[~np.eye(n, dtype=bool)]):
        return float(np.max(np.abs(np.diag(matrix))))
    return float(scipy.linalg.svdvals(matrix, check_finite=False)[0])


def identity(n: int) -> Observable:
    """Identity observable with exact norm bound 1.

    Args:
        n: Matrix dimension.

    Returns:
        Non-traceless observable labelled `I`.
    """
    return Observable(np.eye(n), traceless=False, op_norm_bound=1.0, label="I")


def traceless(b: Observable) -> Observable:
    """Return B - <B> I.

    The result is recomputed from the matrix, so applying it twice gives
    the same matrix as applying it once.

    Args:
        b: Any observable.

    Returns:
        Traceless observable with an exact norm bound.
    """
    if b.traceless:
        return b
    mean = b.mean
    matrix = b.matrix - mean * np.eye(b.n)
    return Observable(matrix, traceless=True, label=f"({b.label})°" if b.label else "°")


def build_m0(sq: SqrtProfile) -> ObservableFamily:
    """Level-0 family {n diag S~_mu}.

    Args:
        sq: Square root of the profile; must have strictly positive entries.

    Returns:
        n diagonal observables, member mu carrying n * S~[:, mu].

    Raises:
        AssumptionViolated: If some entry of S~ is not strictly positive.
    """
    sq.require_assumption()
    n = sq.n
    members = tuple(
        Observable(np.diag(n * sq.s_tilde[:, mu]), traceless=False, label=f"S{mu}")
        for mu in range(n)
    )
    return ObservableFamily(level=0, members=members, sampled=False)


def build_m1(m0: ObservableFamily, m: Observable) -> ObservableFamily:
    """Level-1 family {I, M} followed by the level-0 members.

    Raises:
        ValueError: If `m` is not traceless, not Hermitian, has norm above 1,
            or its dimension does not match the level-0 family.
    """
    if m0.level != 0:
        raise ValueError(f"build_m1 expects a level-0 family, got level {m0.level}.")
    if m0.members and m0.members[0].n != m.n:
        raise ValueError(f"Observable dimension {m.n} does not match family dimension {m0.members[0].n}.")
    if abs(m.mean) > TRACELESS_TOLERANCE:
        raise ValueError(f"Observable M must be traceless, got <M> = {m.mean:.3e}.")
    defect = float(np.max(np.abs(m.matrix - m.matrix.conj().T))) if m.n else 0.0
    if defect > HERMITIAN_TOLERANCE:
        raise ValueError(f"Observable M must be Hermitian, defect {defect:.3e}.")
    if m.op_norm_bound > 1.0 + NORM_SLACK:
        raise ValueError(f"Observable M must have operator norm at most 1, got {m.op_norm_bound:.12g}.")
    members = (identity(m.n), m, *m0.members)
    return ObservableFamily(level=1, members=members, sampled=False)


def _pair_pool(fam: ObservableFamily) -> list[Observable]:
    return [*fam.members, *(traceless(member) for member in fam.members)]


def extend(fam: ObservableFamily, max_members: int = DEFAULT_MAX_MEMBERS, seed: int = 0) -> ObservableFamily:
    """Next level of products B1 B2 with B1, B2 in M_k and its traceless parts.

    Ordered pairs are enumerated row-major over the pool `members + traceless(members)`.
    When the (2s)^2 pairs exceed `max_members`, a seeded uniform subsample
    of pair indices is kept in increasing order.

    Args:
        fam: Family at level >= 1.
        max_members: Cap on the number of products.
        seed: Subsampling seed.

    Returns:
        Family at level `fam.level + 1`.
    """
    if fam.level < 1:
        raise ValueError(f"extend needs a family at level >= 1, got level {fam.level}.")
    if fam.level >= MAX_LEVEL:
        raise ValueError(f"Families deeper than level {MAX_LEVEL} are not generated.")
    if max_members < 1:
        raise ValueError("max_members must be at least 1.")
    pool = _pair_pool(fam)
    size = len(pool)
    total = size * size
    sampled = total > max_members
    if sampled:
        sequence = np.random.SeedSequence(entropy=seed, spawn_key=(fam.level,))
        rng = np.random.Generator(np.random.PCG64(sequence))
        indices = np.sort(rng.choice(total, size=max_members, replace=False))
    else:
        indices = np.arange(total)

    members = []
    for index in indices:
        left, right = pool[int(index) // size], pool[int(index) % size]
        product = left.matrix @ right.matrix
        bound = min(left.op_norm_bound * right.op_norm_bound, spectral_norm(product) * (1.0 + NORM_SLACK))
        members.append(Observable(product, traceless=False, op_norm_bound=bound))
    logger.debug("Level %d family: %d of %d products (sampled=%s)", fam.level + 1, len(members), total, sampled)
    return ObservableFamily(level=fam.level + 1, members=tuple(members), sampled=sampled)


def build_hierarchy(
    sq: SqrtProfile,
    m: Observable,
    depth: int,
    max_members: int = DEFAULT_MAX_MEMBERS,
    seed: int = 0,
) -> list[ObservableFamily]:
    """Families M_0 .. M_depth for one profile and observable."""
    families = [build_m0(sq)]
    if depth >= 1:
        families.append(build_m1(families[0], m))
    while len(families) <= depth:
        families.append(extend(families[-1], max_members=max_members, seed=seed))
    return families


def _unit_traceless(matrix: np.ndarray, label: str) -> Observable:
    centered = matrix - normalized_trace(matrix) * np.eye(matrix.shape[0])
    norm = spectral_norm(centered)
    if norm <= TRACELESS_TOLERANCE * max(1.0, spectral_norm(matrix)):
        raise ValueError(f"Observable {label!r} has zero traceless part and cannot be normalized.")
    return Observable(centered / norm, traceless=True, op_norm_bound=1.0, label=label)


def alternating(n: int) -> Observable:
    """diag(1, -1, 1, ...), recentred and normalized when n is odd."""
    if n < 2:
        raise ValueError("Alternating observable needs n >= 2.")
    signs = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    if n % 2 == 0:
        return Observable(np.diag(signs), traceless=True, op_norm_bound=1.0, label="alternating")
    return _unit_traceless(np.diag(signs), "alternating")


def gue(n: int, rng: np.random.Generator) -> Observable:
    """Traceless complex Hermitian Gaussian matrix scaled to unit norm."""
    if n < 2:
        raise ValueError("GUE observable needs n >= 2.")
    raw = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    return _unit_traceless(0.5 * (raw + raw.conj().T), "gue")


def rank1(n: int, rng: np.random.Generator) -> Observable:
    """Traceless part of a random rank-one projection, scaled to unit norm."""
    if n < 2:
        raise ValueError("Rank-one observable needs n >= 2.")
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    return _unit_traceless(np.outer(v, v.conj()), "rank1")


def fourier(n: int, frequency: int = 1) -> Observable:
    """diag(cos(2 pi k i / n)), traceless for k not divisible by n."""
    if n < 2:
        raise ValueError("Fourier observable needs n >= 2.")
    if frequency % n == 0:
        raise ValueError(f"Fourier frequency {frequency} is a multiple of n={n}; the observable is not traceless.")
    values = np.cos(2.0 * np.pi * frequency * np.arange(n) / n)
    values[np.abs(values) < 1e-15] = 0.0
    values -= values.mean()
    return Observable(np.diag(values), traceless=True, label=f"fourier{frequency}")


def level0(sq: SqrtProfile, mu: int = 0) -> Observable:
    """Traceless part of n diag S~_mu, scaled to unit norm."""
    if not 0 <= mu < sq.n:
        raise ValueError(f"Level-0 index mu must lie in [0, {sq.n}), got {mu}.")
    return _unit_traceless(np.diag(sq.s_tilde[:, mu] * sq.n), f"level0[{mu}]")


def _entries_matrix(entries: Any, n: int) -> np.ndarray:
    if not isinstance(entries, list) or len(entries) != n * n:
        raise ConfigError(f"Explicit observable needs {n * n} row-major 'entries'.")
    values = []
    for entry in entries:
        if isinstance(entry, list) and len(entry) == 2:
            values.append(complex(float(entry[0]), float(entry[1])))
        elif isinstance(entry, (int, float)) and not isinstance(entry, bool):
            values.append(complex(entry))
        else:
            raise ConfigError(f"Observable entry {entry!r} is neither a number nor a [re, im] pair.")
    return np.asarray(values, dtype=np.complex128).reshape(n, n)


def observable_from_json(
    payload: Any,
    n: int,
    sq: SqrtProfile | None = None,
    seed: int = 0,
) -> Observable:
    """Build an observable from `{"kind": ..., "entries"?, "frequency"?, "mu"?}`.

    Named generators draw their randomness from `seed`; `level0` needs the
    profile square root. Explicit entries are used as given, with the
    traceless flag set only when the trace vanishes.

    Raises:
        ConfigError: If the description is invalid.
    """
    if isinstance(payload, str):
        payload = {"kind": payload}
    if not isinstance(payload, dict):
        raise ConfigError("Observable description must be a string or JSON object.")
    kind = payload.get("kind")
    if kind not in OBSERVABLE_KINDS:
        raise ConfigError(f"Observable 'kind' must be one of {', '.join(OBSERVABLE_KINDS)}, got {kind!r}.")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0x0B5,)))
    try:
        if kind == "alternating":
            return alternating(n)
        if kind == "gue":
            return gue(n, rng)
        if kind == "rank1":
            return rank1(n, rng)
        if kind == "fourier":
            return fourier(n, int(payload.get("frequency", 1)))
        if kind == "level0":
            if sq is None:
                raise ConfigError("Observable 'level0' needs a profile whose square root has strictly positive entries.")
            return level0(sq, int(payload.get("mu", 0)))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc

    matrix = _entries_matrix(payload.get("entries"), n)
    return Observable(matrix, traceless=abs(normalized_trace(matrix)) <= TRACELESS_TOLERANCE, label="explicit")


def observable_to_json(obs: Observable) -> dict[str, Any]:
    """Explicit JSON form with `[re, im]` entries in row-major order."""
    flat = obs.matrix.reshape(-1)
    return {"kind": "explicit", "entries": [[float(v.real), float(v.imag)] for v in flat]}
