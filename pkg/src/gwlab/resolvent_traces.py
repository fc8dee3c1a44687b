from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Literal, Sequence, Union

import numpy as np
import scipy.linalg

from .ensemble import WignerSample, dump_matrix, is_complex_law
from .errors import UnsupportedChain, UnsupportedLaw
from .observables import Observable
from .spectral import SpectralDecomposition, stieltjes_m
from .variance_profile import SqrtProfile

logger = logging.getLogger(__name__)

Flavor = Literal["plain", "adjoint", "transpose", "imag"]
FLAVORS: tuple[Flavor, ...] = ("plain", "adjoint", "transpose", "imag")
CHAIN_FLAVORS: tuple[Flavor, ...] = ("plain", "adjoint", "imag")


@dataclass(frozen=True)
class ResolventSpec:
    z: complex
    flavor: Flavor = "plain"

    def __post_init__(self) -> None:
        object.__setattr__(self, "z", complex(self.z))
        if self.z.imag == 0.0:
            raise ValueError(f"Resolvent needs Im z != 0, got z = {self.z}.")
        if self.flavor not in FLAVORS:
            raise ValueError(f"Unknown resolvent flavor {self.flavor!r}; expected one of {', '.join(FLAVORS)}.")

    @property
    def symbol_label(self) -> str:
        return {"plain": "G", "adjoint": "G*", "transpose": "Gt", "imag": "ImG"}[self.flavor]

    def components(self) -> list[tuple[complex, complex]]:
        """Expansion into plain resolvents as `(coefficient, z)` pairs."""
        if self.flavor == "adjoint":
            return [(1.0, self.z.conjugate())]
        if self.flavor == "imag":
            return [(1.0 / 2j, self.z), (-1.0 / 2j, self.z.conjugate())]
        return [(1.0, self.z)]


@dataclass(frozen=True, eq=False)
class OverlapMatrix:
    entries: np.ndarray
    conjugated: bool = False

    @property
    def n(self) -> int:
        return int(self.entries.shape[0])


@dataclass(frozen=True)
class RenormalizedTrace:
    value: complex
    chain: str
    subtraction: complex = 0j


ChainItem = Union[ResolventSpec, Observable]


def symbol(lambdas: np.ndarray, spec: ResolventSpec) -> np.ndarray:
    """Scalar symbol g(lambda) of a resolvent flavor evaluated on eigenvalues.

    Transposition does not change the eigenvalue symbol; it swaps the basis.
    """
    delta = lambdas - spec.z
    if spec.flavor == "adjoint":
        return 1.0 / np.conj(delta)
    if spec.flavor == "imag":
        eta = spec.z.imag
        return (eta / (delta.real**2 + eta**2)).astype(np.complex128)
    return 1.0 / delta


def _basis(decomp: SpectralDecomposition, spec: ResolventSpec) -> np.ndarray:
    # G^t = conj(U) g conj(U)^*
    return decomp.vectors.conj() if spec.flavor == "transpose" else decomp.vectors


def overlap(decomp: SpectralDecomposition, a: Observable, conjugated: bool = False) -> OverlapMatrix:
    """O = U^* A U, or U^* A conj(U) when `conjugated`.

    Raises:
        ValueError: If the dimensions differ.
    """
    if a.n != decomp.n:
        raise ValueError(f"Observable dimension {a.n} does not match decomposition dimension {decomp.n}.")
    u = decomp.vectors
    right = u.conj() if conjugated else u
    entries = u.conj().T @ (a.matrix @ right)
    entries.setflags(write=False)
    return OverlapMatrix(entries=entries, conjugated=conjugated)


def dump_overlap(o: OverlapMatrix, path: Path) -> None:
    """Write an overlap matrix in the GWIG sample-dump format."""
    dump_matrix(o.entries, "complex_gaussian", path)


def _diag_overlap(decomp: SpectralDecomposition, a: Observable) -> np.ndarray:
    u = decomp.vectors
    return np.einsum("ji,ji->i", u.conj(), a.matrix @ u)


def trace_ga(decomp: SpectralDecomposition, a: Observable, z: complex) -> complex:
    """<G A> = (1/N) sum_i O_ii / (lambda_i - z)."""
    spec = ResolventSpec(z)
    if a.n != decomp.n:
        raise ValueError(f"Observable dimension {a.n} does not match decomposition dimension {decomp.n}.")
    return complex(np.sum(symbol(decomp.lambdas, spec) * _diag_overlap(decomp, a)) / decomp.n)


def two_resolvent_sum(g1: np.ndarray, x: np.ndarray, g2: np.ndarray, y: np.ndarray) -> complex:
    """(1/N) sum_ij g1_i x_ij g2_j y_ji."""
    n = g1.shape[0]
    return complex(np.sum((g1[:, None] * x * g2[None, :]) * y.T) / n)


def trace_two(
    decomp: SpectralDecomposition,
    a: Observable,
    b: Observable,
    r1: ResolventSpec,
    r2: ResolventSpec,
) -> complex:
    """<F1 A F2 B> for resolvent flavors F1, F2 assembled from the eigensystem.

    Each flavor is F = V diag(g) V^* with V = U, or V = conj(U) for the
    transpose flavor, so the trace reduces to the double spectral sum
    (1/N) sum_ij g1_i (V1^* A V2)_ij g2_j (V2^* B V1)_ji.

    Args:
        decomp: Eigensystem of the sample.
        a: First observable.
        b: Second observable.
        r1: Flavor and spectral parameter of the first resolvent.
        r2: Flavor and spectral parameter of the second resolvent.

    Returns:
        Normalized trace.
    """
    for obs in (a, b):
        if obs.n != decomp.n:
            raise ValueError(f"Observable dimension {obs.n} does not match decomposition dimension {decomp.n}.")
    v1, v2 = _basis(decomp, r1), _basis(decomp, r2)
    x = v1.conj().T @ a.matrix @ v2
    y = v2.conj().T @ b.matrix @ v1
    return two_resolvent_sum(symbol(decomp.lambdas, r1), x, symbol(decomp.lambdas, r2), y)


def resolvent_from_decomp(decomp: SpectralDecomposition, spec: ResolventSpec) -> np.ndarray:
    """Dense resolvent flavor V diag(g) V^* built from the eigensystem.

    Args:
        decomp: Eigensystem of the sample.
        spec: Flavor and spectral parameter.

    Returns:
        n x n complex matrix.
    """
    v = _basis(decomp, spec)
    return (v * symbol(decomp.lambdas, spec)) @ v.conj().T


def resolvent_dense(w: np.ndarray, spec: ResolventSpec) -> np.ndarray:
    """Resolvent flavor formed by dense inversion of W - z."""
    n = w.shape[0]
    g = scipy.linalg.inv(np.asarray(w, dtype=np.complex128) - spec.z * np.eye(n), check_finite=False)
    if spec.flavor == "adjoint":
        return g.conj().T
    if spec.flavor == "transpose":
        return g.T
    if spec.flavor == "imag":
        return (g - g.conj().T) / 2j
    return g


def trace_dense(
    w: np.ndarray,
    a: Observable,
    b: Observable,
    r1: ResolventSpec,
    r2: ResolventSpec,
) -> complex:
    """Dense-inversion oracle for `trace_two`."""
    product = resolvent_dense(w, r1) @ a.matrix @ resolvent_dense(w, r2) @ b.matrix
    return complex(np.trace(product) / w.shape[0])


def local_law_statistic(decomp: SpectralDecomposition, z: complex) -> float:
    """max_ij |G_ij - m delta_ij|."""
    spec = ResolventSpec(z)
    g = resolvent_from_decomp(decomp, spec)
    m = stieltjes_m(spec.z).m
    return float(np.max(np.abs(g - m * np.eye(decomp.n))))


def _self_energy(s: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Diagonal of diag(S diagvec(X)) as a vector."""
    return s @ np.diag(x)


def _require_complex(sample: WignerSample) -> None:
    if not is_complex_law(sample.law):
        raise UnsupportedLaw(
            f"Renormalized products need a complex Hermitian law; sample was drawn with {sample.law!r}."
        )


def _parse_chain(chain: Sequence[ChainItem]) -> tuple[list[ResolventSpec], list[Observable]]:
    items = list(chain)
    if len(items) not in (2, 4) or len(items) % 2:
        raise UnsupportedChain(f"Chains must alternate one or two resolvents with observables, got {len(items)} items.")
    specs = items[0::2]
    observables = items[1::2]
    if not all(isinstance(spec, ResolventSpec) for spec in specs) or not all(
        isinstance(obs, Observable) for obs in observables
    ):
        raise UnsupportedChain("Chains must alternate ResolventSpec and Observable, starting with a resolvent.")
    for spec in specs:
        if spec.flavor not in CHAIN_FLAVORS:
            raise UnsupportedChain(f"Renormalized chains do not support the {spec.flavor!r} flavor.")
    return specs, observables


def _chain_label(specs: Sequence[ResolventSpec], observables: Sequence[Observable]) -> str:
    parts = ["W"]
    for spec, obs in zip(specs, observables):
        parts.append(f"{spec.symbol_label}({spec.z:.6g})")
        parts.append(obs.label or "B")
    return "·".join(parts)


def renormalized_chain(
    sample: WignerSample,
    decomp: SpectralDecomposition,
    chain: Sequence[ChainItem],
) -> RenormalizedTrace:
    """Normalized trace of the renormalized product W·F1·B1 or W·F1·B1·F2·B2.

    Every resolvent in the chain contributes one subtraction term
    <diag(S diagvec(X)) G_c (rest)>, where X is the chain up to and
    including that resolvent and G_c runs over the plain resolvents in the
    flavor's expansion (G* is G at conj z, Im G is (G - G*)/(2i)).

    Args:
        sample: Complex Hermitian sample carrying W and its profile.
        decomp: Eigensystem of `sample`.
        chain: `[F1, B1]` or `[F1, B1, F2, B2]`.

    Returns:
        Renormalized trace with the subtraction part reported separately.

    Raises:
        UnsupportedLaw: For real symmetric samples.
        UnsupportedChain: For transpose flavors or longer chains.
    """
    _require_complex(sample)
    specs, observables = _parse_chain(chain)
    n = decomp.n
    s = sample.profile.s

    def plain(z: complex) -> np.ndarray:
        return resolvent_from_decomp(decomp, ResolventSpec(z))

    flavored = [resolvent_from_decomp(decomp, spec) for spec in specs]
    if len(specs) == 1:
        tail = observables[0].matrix
        product = flavored[0] @ tail
        subtraction = 0j
        for coef, z in specs[0].components():
            g = plain(z)
            subtraction += coef * np.trace(_self_energy(s, g)[:, None] * (g @ tail)) / n
    else:
        b1, b2 = observables[0].matrix, observables[1].matrix
        head = flavored[0] @ b1
        tail = flavored[1] @ b2
        product = head @ tail
        subtraction = 0j
        for coef, z in specs[0].components():
            g = plain(z)
            subtraction += coef * np.trace(_self_energy(s, g)[:, None] * (g @ b1 @ tail)) / n
        for coef, z in specs[1].components():
            g = plain(z)
            subtraction += coef * np.trace(_self_energy(s, head @ g)[:, None] * (g @ b2)) / n

    direct = np.trace(sample.w @ product) / n
    return RenormalizedTrace(
        value=complex(direct + subtraction),
        chain=_chain_label(specs, observables),
        subtraction=complex(subtraction),
    )


def renormalized_wga(
    sample: WignerSample,
    decomp: SpectralDecomposition,
    a: Observable,
    z: complex,
    flavor: Flavor = "plain",
) -> RenormalizedTrace:
    """<underline{W G A}> = <W G A> + <diag(S diagvec(G)) G A>."""
    return renormalized_chain(sample, decomp, [ResolventSpec(z, flavor), a])


def identity_residual_fundga(
    sample: WignerSample,
    decomp: SpectralDecomposition,
    a: Observable,
    z: complex,
) -> float:
    """Residual of <GA> = -m <underline{WGA}> + m (1/N) sum_ij S_ij (G_jj - m) (GA)_ii.

    The identity is exact for traceless A and any profile with unit row sums.

    Raises:
        ValueError: If `a` is not traceless.
        UnsupportedLaw: For real symmetric samples.
    """
    if abs(a.mean) > 1e-10:
        raise ValueError(f"Identity check needs a traceless observable, got <A> = {a.mean:.3e}.")
    spec = ResolventSpec(z)
    m = stieltjes_m(spec.z).m
    g = resolvent_from_decomp(decomp, spec)
    ga = g @ a.matrix
    trace_g_a = np.trace(ga) / decomp.n
    underline = renormalized_wga(sample, decomp, a, spec.z).value
    fluctuation = np.diag(ga) @ (sample.profile.s @ (np.diag(g) - m)) / decomp.n
    return float(abs(trace_g_a + m * underline - m * fluctuation))


def identity_residual_splitting(
    sample: WignerSample,
    decomp: SpectralDecomposition,
    a: Observable,
    z: complex,
    sq: SqrtProfile,
) -> float:
    """Difference between the S-weighted fluctuation term and its square-root splitting.

    Compares (1/N) sum_ij S_ij (G_jj - m)(GA)_ii with
    (1/N) sum_mu <GA N diag S~_mu> <G (N diag S~_mu)°> + <GA><G - m>.

    Raises:
        AssumptionViolated: If `sq` has a non-positive entry.
    """
    sq.require_assumption()
    spec = ResolventSpec(z)
    m = stieltjes_m(spec.z).m
    n = decomp.n
    g = resolvent_from_decomp(decomp, spec)
    ga_diag = np.diag(g @ a.matrix)
    g_diag = np.diag(g)
    mean_g = g_diag.sum() / n
    mean_ga = ga_diag.sum() / n

    lhs = ga_diag @ (sample.profile.s @ (g_diag - m)) / n
    # <GA N diag S~_mu> and <G (N diag S~_mu)°> for every mu at once
    weighted_ga = sq.s_tilde.T @ ga_diag
    member_means = sq.s_tilde.sum(axis=0)
    centred_g = sq.s_tilde.T @ g_diag - member_means * mean_g
    rhs = weighted_ga @ centred_g / n + mean_ga * (mean_g - m)
    return float(abs(lhs - rhs))
