"""Pre/post-selected states, weak values, and the per-round Kraus operators.

One round of the protocol prepares a system qubit, couples it weakly to the
meter through exp(-i*gt*sigma_z (x) O_A), and post-selects the system. The net
effect on the meter is a non-unitary operator K. Two constructions are
provided:

* ``kraus_first_order`` -- the general N-level meter form
  K = <psi_f|psi_S> (I - i*gt*O_w*O_A), valid to first order in gt;
* ``kraus_exact_qubit`` -- the closed form K = c*I + d*sigma_x for a qubit
  meter with O_A = sigma_x, valid at any coupling strength.

The sign convention for d follows the exact unitary:
d = -i*sin(gt)*<psi_f|sigma_z|psi_S>. The brute-force bipartite simulator
certifies this choice in the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    CouplingTooStrong,
    DimensionMismatch,
    NotHermitian,
    VanishingOverlap,
)
from .linalg import (
    MINUS,
    PLUS,
    SIGMA_X,
    SIGMA_Z,
    SpectralDecomposition,
    as_matrix,
    hermitian_eig,
    is_hermitian,
)
from .tolerances import DEFAULT, Tolerances

FIRST_ORDER = "first_order_general"
EXACT_QUBIT = "exact_qubit"


@dataclass(frozen=True)
class SystemPreparation:
    """System qubit prepared as cos(theta)|0> + sin(theta)|1>, theta in [0, pi/2]."""

    theta: float

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi / 2.0:
            raise ValueError(f"theta must lie in [0, pi/2], got {self.theta}")

    def ket(self) -> np.ndarray:
        return np.array([math.cos(self.theta), math.sin(self.theta)], dtype=complex)


@dataclass(frozen=True)
class PostSelection:
    """Post-selected system state cos(phi)|0> + e^{i alpha} sin(phi)|1>.

    phi's canonical chart is [0, pi] (the polar angle used as the control
    parameter); any real value is accepted, since the expression defines a
    unit vector for every phi and sweeps straddle the endpoints.
    """

    phi: float
    alpha: float

    def __post_init__(self):
        if not (math.isfinite(self.phi) and math.isfinite(self.alpha)):
            raise ValueError("phi and alpha must be finite")

    def ket(self) -> np.ndarray:
        return np.array(
            [math.cos(self.phi), np.exp(1j * self.alpha) * math.sin(self.phi)],
            dtype=complex,
        )


@dataclass(frozen=True)
class CouplingSpec:
    """Interaction strength g and duration t; the dynamics depend on gt only.

    gt must be nonnegative; the first-order constructor additionally enforces
    the weakness bound.
    """

    strength: float
    time: float = 1.0

    def __post_init__(self):
        if self.strength < 0.0 or self.time < 0.0:
            raise ValueError("coupling strength and time must be nonnegative")

    @property
    def gt(self) -> float:
        return self.strength * self.time

    @staticmethod
    def from_gt(gt: float) -> "CouplingSpec":
        return CouplingSpec(strength=gt, time=1.0)


@dataclass(frozen=True)
class WeakValue:
    """<psi_f|O_S|psi_S> / <psi_f|psi_S>; its imaginary part drives everything."""

    value: complex

    @property
    def real_part(self) -> float:
        return self.value.real

    @property
    def imaginary_part(self) -> float:
        return self.value.imag


@dataclass(frozen=True, eq=False)
class MeterObservable:
    """Hermitian N x N meter observable with its spectral decomposition."""

    matrix: np.ndarray
    spectrum: SpectralDecomposition
    nondegenerate: bool

    @staticmethod
    def from_matrix(matrix, tol: Tolerances = DEFAULT) -> "MeterObservable":
        m = as_matrix(matrix)
        if not is_hermitian(m, tol.hermiticity):
            raise NotHermitian("meter observable must be Hermitian")
        spec = hermitian_eig(m, tol)
        vals = spec.eigenvalues.real
        gaps = np.abs(vals[:, None] - vals[None, :]) + np.eye(len(vals))
        nondeg = bool(gaps.min() > 1e-10)
        m = m.copy()
        m.setflags(write=False)
        return MeterObservable(matrix=m, spectrum=spec, nondegenerate=nondeg)

    @staticmethod
    def sigma_x(tol: Tolerances = DEFAULT) -> "MeterObservable":
        return MeterObservable.from_matrix(SIGMA_X, tol)

    @staticmethod
    def diagonal(values, tol: Tolerances = DEFAULT) -> "MeterObservable":
        return MeterObservable.from_matrix(np.diag(np.asarray(values, dtype=float)), tol)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


@dataclass(frozen=True, eq=False)
class KrausOperator:
    """The per-round meter map, with its spectrum computed in closed form.

    ``observable_eigenvalues[j]`` is the meter-observable eigenvalue whose
    eigenvector is ``spectrum.eigenvectors[:, j]`` (the fixed points of the
    map are exactly these eigenvectors).
    """

    matrix: np.ndarray
    form: str
    overlap: complex
    gt: float
    spectrum: SpectralDecomposition
    observable_eigenvalues: tuple[float, ...]
    c: complex | None = None
    d: complex | None = None
    weak_value: complex | None = None
    meter_observable: MeterObservable | None = field(default=None, repr=False)

    def __post_init__(self):
        self.matrix.setflags(write=False)

    @property
    def dimension(self) -> int:
        return self.matrix.shape[0]


def overlap(prep: SystemPreparation, post: PostSelection) -> complex:
    """<psi_f|psi_S> = cos(phi)cos(theta) + e^{-i alpha} sin(phi)sin(theta)."""
    return complex(np.vdot(post.ket(), prep.ket()))


def weak_value(
    prep: SystemPreparation,
    post: PostSelection,
    observable=SIGMA_Z,
    tol: Tolerances = DEFAULT,
) -> WeakValue:
    """Weak value of a system observable between pre- and post-selection.

    Raises VanishingOverlap when |<psi_f|psi_S>| falls below the overlap
    floor; the quotient diverges there and downstream consumers must not
    ingest it.
    """
    obs = as_matrix(observable)
    if obs.shape != (2, 2):
        raise DimensionMismatch("system observable must be 2x2")
    if not is_hermitian(obs, tol.hermiticity):
        raise NotHermitian("system observable must be Hermitian")
    ov = overlap(prep, post)
    if abs(ov) <= tol.overlap_floor:
        raise VanishingOverlap(abs(ov))
    num = complex(np.vdot(post.ket(), obs @ prep.ket()))
    return WeakValue(num / ov)


def kraus_first_order(
    ov: complex,
    wv: WeakValue,
    coupling: CouplingSpec,
    meter_obs: MeterObservable,
    tol: Tolerances = DEFAULT,
) -> KrausOperator:
    """K = ov * (I - i*gt*O_w*O_A), with spectrum inherited from O_A.

    Eigenvalues are ov*(1 - i*gt*O_w*o_j) with the eigenvectors of O_A; the
    decomposition is exact for this matrix, not a first-order approximation.
    """
    gt = coupling.gt
    if gt > tol.weakness_bound:
        raise CouplingTooStrong(
            f"gt = {gt} exceeds the weakness bound {tol.weakness_bound}"
        )
    n = meter_obs.dimension
    matrix = ov * (np.eye(n, dtype=complex) - 1j * gt * wv.value * meter_obs.matrix)

    o_vals = meter_obs.spectrum.eigenvalues.real
    lams = ov * (1.0 - 1j * gt * wv.value * o_vals)
    order = np.lexsort((-lams.imag, -lams.real, -np.abs(lams)))
    spec = SpectralDecomposition(
        eigenvalues=np.ascontiguousarray(lams[order]),
        eigenvectors=meter_obs.spectrum.eigenvectors[:, order].copy(),
    )
    return KrausOperator(
        matrix=matrix,
        form=FIRST_ORDER,
        overlap=complex(ov),
        gt=gt,
        spectrum=spec,
        observable_eigenvalues=tuple(float(o) for o in o_vals[order]),
        weak_value=complex(wv.value),
        meter_observable=meter_obs,
    )


def kraus_exact_qubit(
    prep: SystemPreparation,
    post: PostSelection,
    coupling: CouplingSpec,
    flip_d: bool = False,
) -> KrausOperator:
    """Exact qubit-qubit Kraus operator K = c*I + d*sigma_x, any coupling.

    c = cos(gt) <psi_f|psi_S>, d = -i sin(gt) <psi_f|sigma_z|psi_S>; the
    eigenvalues are c +/- d with the fixed sigma_x eigenvectors |+>, |->.
    ``flip_d`` negates d (a deliberate sign error) so the brute-force check
    can demonstrate that it detects the wrong convention; never set it in
    real use.
    """
    gt = coupling.gt
    ov = overlap(prep, post)
    matel = complex(np.vdot(post.ket(), SIGMA_Z @ prep.ket()))
    c = math.cos(gt) * ov
    d = -1j * math.sin(gt) * matel
    if flip_d:
        d = -d
    matrix = c * np.eye(2, dtype=complex) + d * SIGMA_X

    lam_plus = c + d
    lam_minus = c - d
    lams = np.array([lam_plus, lam_minus])
    vecs = np.column_stack([PLUS, MINUS])
    o_vals = (1.0, -1.0)
    order = np.lexsort((-lams.imag, -lams.real, -np.abs(lams)))
    spec = SpectralDecomposition(
        eigenvalues=np.ascontiguousarray(lams[order]),
        eigenvectors=vecs[:, order].copy(),
    )
    wv = complex(matel / ov) if abs(ov) > 0.0 else None
    return KrausOperator(
        matrix=matrix,
        form=EXACT_QUBIT,
        overlap=complex(ov),
        gt=gt,
        spectrum=spec,
        observable_eigenvalues=tuple(o_vals[i] for i in order),
        c=complex(c),
        d=complex(d),
        weak_value=wv,
    )


def eigenvalue_moduli_gap(k: KrausOperator) -> float:
    """|lambda_1| - |lambda_2| of the sorted Kraus spectrum."""
    return k.spectrum.moduli_gap


def moduli_degenerate(k: KrausOperator, tol: Tolerances = DEFAULT) -> bool:
    """Whether the top two moduli are indistinguishable for this form.

    First-order spectra carry O((gt)^2) modulus noise, so their band is
    ``marginal_band_factor * gt^2``; the exact qubit form is degenerate only
    where Im(O_w) vanishes exactly, so it gets a representation-level band.
    """
    mods = np.abs(k.spectrum.eigenvalues)
    if mods[0] == 0.0:
        return True
    gap_rel = float((mods[0] - mods[1]) / mods[0])
    if k.form == FIRST_ORDER:
        band = max(tol.marginal_band_factor * k.gt**2, tol.exact_degeneracy_rtol)
    else:
        band = tol.exact_degeneracy_rtol
    return gap_rel < band


class AllCritical:
    """Sentinel: the imaginary part of the weak value vanishes at every angle."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "AllCritical"


ALL_CRITICAL = AllCritical()


def find_critical_angles(
    prep: SystemPreparation,
    post_alpha: float,
    coupling: CouplingSpec | None = None,
    grid_size: int = 512,
    observable=SIGMA_Z,
    tol: Tolerances = DEFAULT,
) -> list[float] | AllCritical:
    """All phi in [0, pi] where Im(O_w) crosses or touches zero.

    Scans a uniform grid for sign changes and refines each bracket by
    bisection to |dphi| < 1e-12; the endpoints 0 and pi are tested by direct
    evaluation. Grid points where the post-selection is orthogonal to the
    preparation are excluded and the surrounding bracket refined across them.
    Returns the ALL_CRITICAL sentinel when Im(O_w) is identically zero on the
    grid (purely real weak value).
    """
    if grid_size < 16:
        raise ValueError(f"grid_size must be at least 16, got {grid_size}")
    del coupling  # the weak value does not depend on the coupling

    def im_weak(phi: float) -> float | None:
        try:
            return weak_value(
                prep, PostSelection(phi=phi, alpha=post_alpha), observable, tol
            ).imaginary_part
        except VanishingOverlap:
            return None

    grid = np.linspace(0.0, math.pi, grid_size + 1)
    values = [im_weak(float(p)) for p in grid]

    valid = [v for v in values if v is not None]
    zero_atol = 1e-13
    if valid and all(abs(v) <= zero_atol for v in valid):
        return ALL_CRITICAL

    roots: list[float] = []

    def add_root(phi: float) -> None:
        for r in roots:
            if abs(r - phi) <= 1e-9:
                return
        roots.append(phi)

    # grid points that touch zero, including the explicitly tested endpoints
    for p, v in zip(grid, values):
        if v is not None and abs(v) <= zero_atol:
            add_root(float(p))

    def bisect(lo: float, f_lo: float, hi: float, f_hi: float) -> float:
        while hi - lo > 1e-12:
            mid = (lo + hi) / 2.0
            f_mid = im_weak(mid)
            if f_mid is None:
                # nudge off the orthogonal point; the bracket stays valid
                mid = lo + (hi - lo) * 0.49
                f_mid = im_weak(mid)
                if f_mid is None:
                    break
            if abs(f_mid) <= zero_atol:
                return mid
            if (f_lo < 0.0) != (f_mid < 0.0):
                hi, f_hi = mid, f_mid
            else:
                lo, f_lo = mid, f_mid
        return (lo + hi) / 2.0

    # sign changes between consecutive valid, nonzero grid values
    prev_phi: float | None = None
    prev_val: float | None = None
    for p, v in zip(grid, values):
        if v is None or abs(v) <= zero_atol:
            continue
        if prev_val is not None and (prev_val < 0.0) != (v < 0.0):
            add_root(bisect(prev_phi, prev_val, float(p), v))
        prev_phi, prev_val = float(p), v

    return sorted(roots)


@dataclass(frozen=True)
class ProtocolConfig:
    """Full protocol configuration: everything needed to build K at a given phi."""

    prep: SystemPreparation
    alpha: float
    coupling: CouplingSpec
    form: str = EXACT_QUBIT
    meter_obs: MeterObservable | None = None
    tol: Tolerances = field(default=DEFAULT, repr=False)
    flip_d: bool = False

    def __post_init__(self):
        if self.form not in (EXACT_QUBIT, FIRST_ORDER):
            raise ValueError(f"unknown Kraus form {self.form!r}")
        if self.form == FIRST_ORDER and self.meter_obs is None:
            object.__setattr__(self, "meter_obs", MeterObservable.sigma_x(self.tol))

    def post_selection(self, phi: float) -> PostSelection:
        return PostSelection(phi=phi, alpha=self.alpha)

    def weak_value_at(self, phi: float) -> WeakValue:
        return weak_value(self.prep, self.post_selection(phi), SIGMA_Z, self.tol)

    def kraus(self, phi: float) -> KrausOperator:
        post = self.post_selection(phi)
        if self.form == EXACT_QUBIT:
            return kraus_exact_qubit(self.prep, post, self.coupling, flip_d=self.flip_d)
        ov = overlap(self.prep, post)
        if abs(ov) <= self.tol.overlap_floor:
            raise VanishingOverlap(abs(ov))
        wv = weak_value(self.prep, post, SIGMA_Z, self.tol)
        return kraus_first_order(ov, wv, self.coupling, self.meter_obs, self.tol)

    def critical_angles(self, grid_size: int = 512) -> list[float] | AllCritical:
        return find_critical_angles(
            self.prep, self.alpha, self.coupling, grid_size, SIGMA_Z, self.tol
        )

    def kraus_factory(self) -> Callable[[float], KrausOperator]:
        return self.kraus
