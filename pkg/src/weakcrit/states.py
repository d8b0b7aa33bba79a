"""Meter-state value types shared by the Kraus-map and brute-force paths.

Kept free of any protocol/Kraus machinery so the brute-force simulator can
depend on it without touching the code it is meant to check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionMismatch, NotHermitian
from .tolerances import DEFAULT, Tolerances


@dataclass(frozen=True)
class BlochVector:
    """Real (rx, ry, rz) triple for a qubit density operator."""

    rx: float
    ry: float
    rz: float

    @property
    def norm(self) -> float:
        return math.sqrt(self.rx**2 + self.ry**2 + self.rz**2)

    def as_array(self) -> np.ndarray:
        return np.array([self.rx, self.ry, self.rz], dtype=float)

    @staticmethod
    def from_array(r) -> "BlochVector":
        rx, ry, rz = (float(x) for x in r)
        return BlochVector(rx, ry, rz)


@dataclass(frozen=True, eq=False)
class MeterState:
    """Density operator of the N-level meter.

    Validated on construction: Hermitian and unit trace to 1e-12, eigenvalues
    no more negative than the PSD floor. The stored array is read-only.
    """

    rho: np.ndarray
    tol: Tolerances = field(default=DEFAULT, repr=False, compare=False)

    def __post_init__(self):
        rho = np.array(self.rho, dtype=complex)
        if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
            raise DimensionMismatch(f"density operator must be square, got {rho.shape}")
        scale = max(float(np.linalg.norm(rho)), 1.0)
        if float(np.max(np.abs(rho - rho.conj().T))) > self.tol.hermiticity * scale:
            raise NotHermitian("density operator is not Hermitian within tolerance")
        tr = rho.trace()
        if abs(tr - 1.0) > self.tol.hermiticity:
            raise ValueError(f"density operator trace {tr} != 1")
        evals = np.linalg.eigvalsh((rho + rho.conj().T) / 2.0)
        if float(evals.min()) < -self.tol.psd_floor:
            raise ValueError(f"density operator has eigenvalue {evals.min():.3e} < 0")
        rho.setflags(write=False)
        object.__setattr__(self, "rho", rho)

    @property
    def dimension(self) -> int:
        return self.rho.shape[0]

    @staticmethod
    def pure(vector, tol: Tolerances = DEFAULT) -> "MeterState":
        """Projector onto a state vector (normalized first)."""
        v = np.asarray(vector, dtype=complex).reshape(-1)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            raise ValueError("cannot build a state from the zero vector")
        v = v / norm
        return MeterState(np.outer(v, v.conj()), tol=tol)

    @staticmethod
    def from_bloch(r: BlochVector | tuple, tol: Tolerances = DEFAULT) -> "MeterState":
        if not isinstance(r, BlochVector):
            r = BlochVector.from_array(r)
        rho = 0.5 * np.array(
            [[1.0 + r.rz, r.rx - 1j * r.ry], [r.rx + 1j * r.ry, 1.0 - r.rz]],
            dtype=complex,
        )
        return MeterState(rho, tol=tol)

    @staticmethod
    def maximally_mixed(dimension: int) -> "MeterState":
        return MeterState(np.eye(dimension, dtype=complex) / dimension)

    def bloch(self) -> BlochVector:
        if self.dimension != 2:
            raise DimensionMismatch("Bloch vector is defined for qubit states only")
        rho = self.rho
        return BlochVector(
            rx=float(2.0 * rho[1, 0].real),
            ry=float(2.0 * rho[1, 0].imag),
            rz=float((rho[0, 0] - rho[1, 1]).real),
        )

    def purity(self) -> float:
        return float(np.trace(self.rho @ self.rho).real)

    def is_pure(self, tol: float = 1e-10) -> bool:
        return 1.0 - self.purity() <= tol


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    """Ordered meter states along one run, with the configuration that made it.

    ``converged_at`` is the first step whose trace distance to the previous
    step fell below the convergence threshold, or None.
    """

    steps: tuple[MeterState, ...]
    parameters: dict | None = None
    converged_at: int | None = None

    @property
    def final(self) -> MeterState:
        return self.steps[-1]

    def bloch_steps(self) -> list[BlochVector]:
        return [s.bloch() for s in self.steps]
