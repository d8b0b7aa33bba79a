"""Exception types raised across the package."""

from __future__ import annotations


class WeakcritError(Exception):
    """Base class for every error this package raises deliberately."""


class DimensionMismatch(WeakcritError):
    """Operands have incompatible dimensions."""


class NotHermitian(WeakcritError):
    """A matrix required to be Hermitian is not, beyond tolerance."""


class DegenerateSpectrum(WeakcritError):
    """A 2x2 matrix is defective: repeated eigenvalue without a full eigenbasis."""


class VanishingOverlap(WeakcritError):
    """Pre- and post-selected states are (numerically) orthogonal.

    Carries the offending overlap magnitude so callers can report it.
    """

    def __init__(self, magnitude: float):
        super().__init__(f"|<psi_f|psi_S>| = {magnitude:.3e} is below the overlap floor")
        self.magnitude = magnitude


class CouplingTooStrong(WeakcritError):
    """gt exceeds the weakness bound; the first-order form is invalid."""


class PostSelectionStarved(WeakcritError):
    """Post-selection probability underflowed; the trajectory cannot continue.

    ``step`` is the first iteration index that could not be completed.
    """

    def __init__(self, step: int, probability: float = 0.0):
        super().__init__(f"post-selection probability underflow at step {step}")
        self.step = step
        self.probability = probability


class NoDominantEigenvalue(WeakcritError):
    """The Kraus spectrum is modulus-degenerate; no unique long-time state."""


class UnstableManifoldStart(WeakcritError):
    """The initial state has no weight on the dominant eigenvector."""


class DimensionTooSmall(WeakcritError):
    """The spectrum has fewer than two eigenvalues."""


class DegenerateMeterObservable(WeakcritError):
    """The two leading meter eigenvalues coincide (o1 = o2)."""


class WindowContainsCriticalPoint(WeakcritError):
    """A fit window sample produced an infinite relaxation time."""


class PoorFit(WeakcritError):
    """The log-log regression fell below the acceptance r-squared.

    ``fit`` carries the rejected ExponentFit for diagnostics.
    """

    def __init__(self, message: str, fit=None):
        super().__init__(message)
        self.fit = fit


class ConfigError(WeakcritError):
    """A run configuration is invalid (unknown field, bad value, bad grid)."""
