"""Exception hierarchy shared by every gwlab module."""

from __future__ import annotations


class GwlabError(Exception):
    """Base class for all errors raised by gwlab."""


class ConfigError(GwlabError, ValueError):
    """Invalid experiment configuration or profile description."""


class ProfileInvalid(GwlabError, ValueError):
    """A variance profile failed validation where a valid one is required."""


class AssumptionViolated(GwlabError, ValueError):
    """The square root of S has a non-positive entry.

    Attributes:
        entry: Offending `(i, j, value)` triple.
    """

    def __init__(self, message: str, entry: tuple[int, int, float]) -> None:
        super().__init__(message)
        self.entry = entry


class UnsupportedLaw(GwlabError, ValueError):
    """Operation requires a complex Hermitian entry law."""


class UnsupportedChain(GwlabError, ValueError):
    """Renormalized chain shape or flavour is not implemented."""


class MixedProfiles(GwlabError, ValueError):
    """Sample specs that must share a profile do not."""


class NumericError(GwlabError, ArithmeticError):
    """Base class for numerical failures (CLI exit code 3)."""


class NotPSD(NumericError):
    """Variance profile has an eigenvalue below the PSD tolerance."""


class NearSingular(NumericError):
    """Stability kernel `I - factor * C` is too close to singular."""


class NoSolution(NumericError):
    """Root bracket does not straddle the requested value."""


class ConvergenceFailure(NumericError):
    """Underlying eigensolver failed to converge."""


class InsufficientSizes(NumericError):
    """Scaling fit needs at least three matrix sizes."""
