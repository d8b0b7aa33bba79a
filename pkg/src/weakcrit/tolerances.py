"""Centralized numerical tolerances.

Every tolerance used by the package lives here so that tests, the CLI and
library callers share one set of defaults and can override them in one place.
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    #: generic verification tolerance (eigen-residuals, equivalence checks)
    verification: float = 1e-10
    #: max relative deviation from A = A^dagger accepted as Hermitian
    hermiticity: float = 1e-12
    #: |<psi_f|psi_S>| below this raises VanishingOverlap
    overlap_floor: float = 1e-12
    #: first-order Kraus constructors reject gt above this
    weakness_bound: float = 0.05
    #: relative |R - 1| below which the relaxation time is reported infinite
    moduli_equal_rtol: float = 1e-14
    #: relative moduli gap below which an exact-qubit spectrum counts as degenerate
    exact_degeneracy_rtol: float = 1e-12
    #: first-order spectra count as degenerate below marginal_band_factor * gt^2
    marginal_band_factor: float = 10.0
    #: successive-step trace distance that marks trajectory convergence
    convergence_trace_distance: float = 1e-10
    #: density-operator eigenvalues may be negative down to -psd_floor
    psd_floor: float = 1e-10
    #: post-selection probability below this raises PostSelectionStarved
    starvation_floor: float = 1e-300
    #: near-unitary spiral regime: relative gap below gt * spiral_gap_scale
    spiral_gap_scale: float = 0.3
    #: minimum r-squared for an accepted power-law fit
    fit_r2_threshold: float = 0.999
    #: Jacobi sweep stops when all off-diagonals are below this times ||m||_F
    jacobi_offdiag: float = 1e-13

    def override(self, **changes: float) -> "Tolerances":
        """Return a copy with the given fields replaced.

        Unknown field names raise ValueError so that configuration typos
        cannot silently loosen a check.
        """
        known = {f.name for f in fields(self)}
        unknown = set(changes) - known
        if unknown:
            raise ValueError(f"unknown tolerance fields: {sorted(unknown)}")
        return replace(self, **changes)


DEFAULT = Tolerances()
