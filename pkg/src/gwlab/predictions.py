from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Literal

import numpy as np

from .observables import Observable
from .spectral import rigidity_scale, stieltjes_m
from .variance_profile import StabilityOperator, VarianceProfile, stability_radius, stability_solve

logger = logging.getLogger(__name__)

Kernel = Literal["printed", "self_consistent"]
KERNELS: tuple[Kernel, ...] = ("printed", "self_consistent")
EnvelopeKind = Literal["local_law", "rigidity", "eth"]
ENVELOPE_KINDS: tuple[EnvelopeKind, ...] = ("local_law", "rigidity", "eth")

TRACELESS_TOLERANCE = 1e-10


@dataclass(frozen=True)
class TwoResolventPrediction:
    main_term: complex
    correction: complex
    kernel: Kernel = "printed"

    @property
    def total(self) -> complex:
        return self.main_term + self.correction


@dataclass(frozen=True)
class ImCombinations:
    plain_plain: complex
    plain_adjoint: complex
    adjoint_plain: complex
    adjoint_adjoint: complex

    @property
    def imag_imag(self) -> complex:
        """<Im G1 A1 Im G2 A2> from Im G = (G - G*) / (2i)."""
        return -0.25 * (self.plain_plain - self.plain_adjoint - self.adjoint_plain + self.adjoint_adjoint)


@lru_cache(maxsize=64)
def stability_operator(profile: VarianceProfile) -> StabilityOperator:
    """Stability operator of a profile, computed once per profile object."""
    return stability_radius(profile)


def _require_traceless(obs: Observable, name: str) -> None:
    if abs(obs.mean) > TRACELESS_TOLERANCE:
        raise ValueError(f"Two-resolvent prediction needs traceless {name}, got <{name}> = {obs.mean:.3e}.")


def predict_two_resolvent(
    profile: VarianceProfile,
    a1: Observable,
    a2: Observable,
    z1: complex,
    z2: complex,
    kernel: Kernel = "printed",
) -> TwoResolventPrediction:
    """Deterministic approximation of <G(z1) A1 G(z2) A2>.

    main_term = m1 m2 <A1 A2>; the correction is
    f (1/N) sum_ab (A1)_aa [S (I - m1 m2 C)^-1]_ab (A2)_bb with f = m1 m2 for
    the printed kernel and (m1 m2)^2 for the self-consistent kernel that
    solves the matrix Dyson equation.

    Args:
        profile: Variance profile S.
        a1: Traceless observable.
        a2: Traceless observable.
        z1: First spectral parameter.
        z2: Second spectral parameter.
        kernel: `printed` or `self_consistent`.

    Returns:
        Main term and stability correction.

    Raises:
        ValueError: If an observable is not traceless or the kernel is unknown.
        NearSingular: If |m1 m2| times the stability radius reaches 1.
    """
    if kernel not in KERNELS:
        raise ValueError(f"Unknown prediction kernel {kernel!r}; expected one of {', '.join(KERNELS)}.")
    if a1.n != profile.n or a2.n != profile.n:
        raise ValueError(f"Observable dimensions ({a1.n}, {a2.n}) do not match profile n={profile.n}.")
    _require_traceless(a1, "A1")
    _require_traceless(a2, "A2")
    n = profile.n
    factor = stieltjes_m(z1).m * stieltjes_m(z2).m
    main_term = factor * np.trace(a1.matrix @ a2.matrix) / n

    op = stability_operator(profile)
    solved = stability_solve(op, factor, np.diag(a2.matrix))
    weight = factor if kernel == "printed" else factor * factor
    correction = weight * (np.diag(a1.matrix) @ (profile.s @ solved)) / n
    return TwoResolventPrediction(main_term=complex(main_term), correction=complex(correction), kernel=kernel)


def predict_im_combinations(
    profile: VarianceProfile,
    a1: Observable,
    a2: Observable,
    z1: complex,
    z2: complex,
    kernel: Kernel = "printed",
) -> ImCombinations:
    """Predictions for every plain/adjoint flavor pair, with G* = G(conj z)."""
    z1, z2 = complex(z1), complex(z2)

    def total(left: complex, right: complex) -> complex:
        return predict_two_resolvent(profile, a1, a2, left, right, kernel).total

    return ImCombinations(
        plain_plain=total(z1, z2),
        plain_adjoint=total(z1, z2.conjugate()),
        adjoint_plain=total(z1.conjugate(), z2),
        adjoint_adjoint=total(z1.conjugate(), z2.conjugate()),
    )


@dataclass(frozen=True)
class Envelope:
    kind: EnvelopeKind

    def __post_init__(self) -> None:
        if self.kind not in ENVELOPE_KINDS:
            raise ValueError(f"Unknown envelope kind {self.kind!r}; expected one of {', '.join(ENVELOPE_KINDS)}.")

    def __call__(self, n: int, **params: float) -> float:
        if n < 1:
            raise ValueError(f"Envelope dimension n must be at least 1, got {n}.")
        if self.kind == "local_law":
            return _local_law(n, complex(params["z"]))
        if self.kind == "rigidity":
            return _rigidity(n, int(params["i"]))
        return float(n) ** (float(params.get("xi", 0.0)) - 0.5)


def _local_law(n: int, z: complex) -> float:
    eta = z.imag
    if eta <= 0.0:
        raise ValueError(f"Local-law envelope needs eta > 0, got {eta}.")
    n_eta = n * eta
    return math.sqrt(stieltjes_m(z).rho / n_eta) + 1.0 / n_eta


def _rigidity(n: int, i: int) -> float:
    if not 1 <= i <= n:
        raise ValueError(f"Rigidity index i must lie in [1, {n}], got {i}.")
    return float(rigidity_scale(i, n))


def envelope(kind: EnvelopeKind, n: int, **params: float) -> float:
    """Evaluate a bound by kind.

    local_law takes `z` and gives sqrt(rho/(N eta)) + 1/(N eta);
    rigidity takes `i` and gives min(i, N-i+1)^(-1/3) N^(-2/3);
    eth takes `xi` and gives N^(xi - 1/2).
    """
    return Envelope(kind)(n, **params)
