from __future__ import annotations

import logging
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence

import numpy as np

from .errors import MixedProfiles
from .variance_profile import VarianceProfile, ensure_valid

logger = logging.getLogger(__name__)

EntryLaw = Literal["complex_gaussian", "real_gaussian", "complex_rademacher_phase"]
ENTRY_LAWS: tuple[EntryLaw, ...] = ("complex_gaussian", "real_gaussian", "complex_rademacher_phase")
DEFAULT_LAW: EntryLaw = "complex_gaussian"

# Stable on-disk codes for the binary dump header.
LAW_CODES: dict[EntryLaw, int] = {
    "complex_gaussian": 0,
    "real_gaussian": 1,
    "complex_rademacher_phase": 2,
}

DUMP_MAGIC = b"GWIG"
_HEADER = struct.Struct("<4sIII")


@dataclass(frozen=True, eq=False)
class SampleSpec:
    profile: VarianceProfile
    law: EntryLaw = DEFAULT_LAW
    seed: int = 0
    sample_index: int = 0


@dataclass(frozen=True, eq=False)
class WignerSample:
    w: np.ndarray
    law: EntryLaw
    profile: VarianceProfile

    @property
    def n(self) -> int:
        return int(self.w.shape[0])


def is_complex_law(law: EntryLaw) -> bool:
    """Return whether the law has vanishing E[w_ij^2] off the diagonal."""
    return law != "real_gaussian"


def sample_rng(seed: int, sample_index: int) -> np.random.Generator:
    """Derive the generator for one sample.

    The stream is `PCG64(SeedSequence(entropy=seed, spawn_key=(sample_index,)))`,
    so sample k is independent of how many other samples are drawn or in
    which order.

    Args:
        seed: Unsigned 64-bit study seed.
        sample_index: Sub-stream selector.

    Returns:
        Fresh generator positioned at the start of the sub-stream.
    """
    if seed < 0 or sample_index < 0:
        raise ValueError("Seed and sample_index must be non-negative.")
    sequence = np.random.SeedSequence(entropy=seed, spawn_key=(sample_index,))
    return np.random.Generator(np.random.PCG64(sequence))


def _hermitian_from_upper(upper: np.ndarray, diagonal: np.ndarray) -> np.ndarray:
    """Assemble W = U + U^* + diag(d) from a strictly upper triangle and a real diagonal."""
    strict = np.triu(upper, k=1)
    w = strict + strict.conj().T
    w[np.diag_indices_from(w)] = diagonal
    return w


def sample(spec: SampleSpec) -> WignerSample:
    """Draw one generalized Wigner matrix.

    Entry (i, j) has mean zero and variance s_ij; diagonal entries are real.
    Complex laws draw the off-diagonal entries with E[w_ij^2] = 0.

    Args:
        spec: Profile, law and (seed, sample_index) stream selector.

    Returns:
        Hermitian sample, exactly symmetric under conjugate transpose.
    """
    profile = spec.profile
    ensure_valid(profile)
    rng = sample_rng(spec.seed, spec.sample_index)
    n = profile.n
    scale = np.sqrt(profile.s)
    diag_scale = np.sqrt(np.diag(profile.s))

    if spec.law == "complex_gaussian":
        re = rng.standard_normal((n, n))
        im = rng.standard_normal((n, n))
        upper = scale * (re + 1j * im) / np.sqrt(2.0)
        diagonal = diag_scale * rng.standard_normal(n)
        w = _hermitian_from_upper(upper.astype(np.complex128), diagonal)
    elif spec.law == "complex_rademacher_phase":
        theta = rng.uniform(0.0, 2.0 * np.pi, size=(n, n))
        upper = scale * np.exp(1j * theta)
        signs = rng.choice(np.array([-1.0, 1.0]), size=n)
        diagonal = diag_scale * signs
        w = _hermitian_from_upper(upper, diagonal)
    elif spec.law == "real_gaussian":
        upper = scale * rng.standard_normal((n, n))
        diagonal = diag_scale * rng.standard_normal(n)
        w = _hermitian_from_upper(upper, diagonal).astype(np.complex128)
    else:
        raise ValueError(f"Unknown entry law {spec.law!r}; expected one of {', '.join(ENTRY_LAWS)}.")

    w.setflags(write=False)
    return WignerSample(w=w, law=spec.law, profile=profile)


def _same_profile(left: VarianceProfile, right: VarianceProfile) -> bool:
    return left is right or (left.n == right.n and np.array_equal(left.s, right.s))


def empirical_variance_profile(specs: Sequence[SampleSpec]) -> np.ndarray:
    """Average |w_ij|^2 over the samples described by `specs`.

    Args:
        specs: At least two specs sharing one profile.

    Returns:
        n x n matrix of empirical second moments.

    Raises:
        ValueError: If fewer than two specs are given.
        MixedProfiles: If the specs do not share a profile.
    """
    if len(specs) < 2:
        raise ValueError("Empirical variance profile needs at least two samples.")
    reference = specs[0].profile
    for index, spec in enumerate(specs[1:], start=2):
        if not _same_profile(reference, spec.profile):
            raise MixedProfiles(f"Sample spec #{index} uses a different variance profile than spec #1.")

    total = np.zeros((reference.n, reference.n))
    for spec in specs:
        total += np.abs(sample(spec).w) ** 2
    return total / len(specs)


def dump_matrix(matrix: np.ndarray, law: EntryLaw, path: Path) -> None:
    """Write a square matrix in the GWIG debug format.

    Layout: 16-byte header (magic `GWIG`, uint32 n, uint32 law code, uint32
    reserved zero) followed by row-major little-endian float64 (re, im) pairs.

    Args:
        matrix: Square real or complex matrix.
        law: Entry law recorded in the header.
        path: Destination file.
    """
    array = np.asarray(matrix, dtype="<c16")
    if array.ndim != 2 or array.shape[0] != array.shape[1]:
        raise ValueError(f"Only square matrices can be dumped, got shape {array.shape}.")
    header = _HEADER.pack(DUMP_MAGIC, array.shape[0], LAW_CODES[law], 0)
    try:
        with path.open("wb") as handle:
            handle.write(header)
            handle.write(np.ascontiguousarray(array).tobytes(order="C"))
    except OSError as exc:
        raise OSError(f"Could not write sample dump {path}: {exc}") from exc


def dump_sample(sample_: WignerSample, path: Path) -> None:
    """Write a sample matrix in the GWIG dump format.

    Args:
        sample_: Sample whose matrix and entry law are written.
        path: Destination file; parent directories must exist.
    """
    dump_matrix(sample_.w, sample_.law, path)


def load_matrix(path: Path) -> tuple[np.ndarray, EntryLaw]:
    """Read a matrix written by `dump_matrix`.

    Returns:
        Tuple of `(matrix, law)`.

    Raises:
        ValueError: If the header or payload size is malformed.
    """
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise ValueError(f"File too short for a GWIG header: {path}")
    magic, n, code, _ = _HEADER.unpack_from(raw)
    if magic != DUMP_MAGIC:
        raise ValueError(f"Bad magic {magic!r} in {path}.")
    laws = {value: key for key, value in LAW_CODES.items()}
    if code not in laws:
        raise ValueError(f"Unknown law code {code} in {path}.")
    payload = raw[_HEADER.size :]
    if len(payload) != 16 * n * n:
        raise ValueError(f"Expected {16 * n * n} payload bytes in {path}, found {len(payload)}.")
    matrix = np.frombuffer(payload, dtype="<c16").reshape(n, n).astype(np.complex128)
    return matrix, laws[code]


def load_sample(path: Path, profile: VarianceProfile) -> WignerSample:
    """Read a dumped sample back, attaching the profile it was drawn from."""
    matrix, law = load_matrix(path)
    if matrix.shape[0] != profile.n:
        raise ValueError(f"Dump {path} holds n={matrix.shape[0]} but the profile has n={profile.n}.")
    if not is_complex_law(law):
        matrix = matrix.real.copy()
    return WignerSample(w=matrix, law=law, profile=profile)
