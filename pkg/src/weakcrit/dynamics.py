"""Iterated Kraus dynamics of the meter state.

Three equivalent representations of the same map are provided and
cross-checked in the tests:

* ``iterate_matrix`` -- the literal map rho -> K rho K^dag / Tr[...],
  renormalized at every step (deferring normalization underflows within a few
  hundred steps, since Tr[K^n rho K^dag^n] ~ |lambda_1|^{2n});
* ``bloch_step`` -- the closed qubit recursion on (rx, ry, rz);
* ``iterate_amplitudes`` -- probability reweighting in the meter-observable
  eigenbasis for the first-order form.

``evolve_state`` jumps straight to step n through the spectral power of K
(identical to n renormalized applications, because normalization is a scalar);
sweeps use it so n = 10^6 costs the same as n = 1.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    NoDominantEigenvalue,
    NotHermitian,
    PostSelectionStarved,
    UnstableManifoldStart,
)
from .linalg import SIGMA_X, as_matrix, is_hermitian, trace_distance
from .protocol import FIRST_ORDER, KrausOperator, moduli_degenerate
from .states import BlochVector, MeterState, TrajectoryRecord
from .tolerances import DEFAULT, Tolerances

STABLE = "stable"
UNSTABLE = "unstable"
MARGINAL_UNITARY = "marginal_unitary"

REGIME_UNITARY = "unitary"
REGIME_STABLE_FLOW_LOW = "stable_flow_low"
REGIME_STABLE_FLOW_HIGH = "stable_flow_high"
REGIME_NEAR_UNITARY_SPIRAL = "near_unitary_spiral"


@dataclass(frozen=True)
class FixedPoint:
    """One fixed point of the map: an eigenvector of K and its stability."""

    index: int
    state: MeterState
    stability: str
    bloch: BlochVector | None = None


@dataclass(frozen=True)
class FixedPointReport:
    fixed_points: tuple[FixedPoint, ...]

    def stable(self) -> FixedPoint | None:
        for fp in self.fixed_points:
            if fp.stability == STABLE:
                return fp
        return None


def _check_meter(k: KrausOperator, state: MeterState) -> None:
    if k.dimension != state.dimension:
        raise DimensionMismatch(
            f"Kraus operator is {k.dimension}-dim, state is {state.dimension}-dim"
        )


def _hermitize(rho: np.ndarray) -> np.ndarray:
    return (rho + rho.conj().T) / 2.0


def iterate_matrix(
    k: KrausOperator,
    initial: MeterState,
    n: int,
    parameters: dict | None = None,
    tol: Tolerances = DEFAULT,
) -> TrajectoryRecord:
    """Apply the normalized map n times, recording the state after each step.

    Raises PostSelectionStarved when Tr[K rho K^dag] underflows; the exception
    carries the offending step and the trajectory computed so far in
    ``exc.record``.
    """
    if n < 0:
        raise ValueError("iteration count must be nonnegative")
    _check_meter(k, initial)
    kd = k.matrix.conj().T
    steps = [initial]
    converged_at = None
    rho = initial.rho
    for step in range(1, n + 1):
        new = k.matrix @ rho @ kd
        tr = float(new.trace().real)
        if tr < tol.starvation_floor:
            exc = PostSelectionStarved(step, tr)
            exc.record = TrajectoryRecord(tuple(steps), parameters, converged_at)
            raise exc
        rho = _hermitize(new / tr)
        state = MeterState(rho, tol=tol)
        if converged_at is None:
            if trace_distance(state, steps[-1]) < tol.convergence_trace_distance:
                converged_at = step
        steps.append(state)
    return TrajectoryRecord(tuple(steps), parameters, converged_at)


def evolve_state(
    k: KrausOperator, initial: MeterState, n: int, tol: Tolerances = DEFAULT
) -> MeterState:
    """State after n normalized applications of K, via the spectral power.

    K^n = V diag(lambda^n) V^{-1}; eigenvalues are rescaled by the dominant
    modulus so nothing overflows, and the subdominant weights underflow to
    zero harmlessly once n exceeds a few hundred relaxation times.
    """
    if n < 0:
        raise ValueError("iteration count must be nonnegative")
    _check_meter(k, initial)
    if n == 0:
        return initial
    lams = k.spectrum.eigenvalues
    v = k.spectrum.eigenvectors
    top = float(np.max(np.abs(lams)))
    if top == 0.0:
        raise PostSelectionStarved(1, 0.0)
    v_inv = np.linalg.inv(v)
    coeff = v_inv @ initial.rho @ v_inv.conj().T
    w = np.empty(len(lams), dtype=complex)
    for j, lam in enumerate(lams):
        r = abs(lam) / top
        if r == 0.0:
            w[j] = 0.0
            continue
        mag = math.exp(n * math.log(r))
        phase = math.fmod(n * cmath.phase(lam), 2.0 * math.pi)
        w[j] = mag * complex(math.cos(phase), math.sin(phase))
    rho = v @ (coeff * np.outer(w, w.conj())) @ v.conj().T
    tr = float(rho.trace().real)
    if tr < tol.starvation_floor:
        raise PostSelectionStarved(n, tr)
    return MeterState(_hermitize(rho / tr), tol=tol)


def iterate_amplitudes(
    k: KrausOperator, initial_amplitudes, n: int, tol: Tolerances = DEFAULT
) -> np.ndarray:
    """Probabilities |c_j|^2 after n rounds, in the meter-observable eigenbasis.

    First-order form only. The per-round probability weight of component j is
    the exact squared eigenvalue modulus |1 - i*gt*O_w*o_j|^2 (whose expansion
    is 1 + 2*gt*Im(O_w)*o_j + O((gt)^2), the plus-sign convention); weights are
    accumulated in log space so large n cannot overflow.
    """
    if k.form != FIRST_ORDER or k.meter_observable is None:
        raise ValueError("amplitude evolution requires the first-order Kraus form")
    if not k.meter_observable.nondegenerate:
        raise ValueError("amplitude evolution requires a non-degenerate meter observable")
    if n < 0:
        raise ValueError("iteration count must be nonnegative")
    c0 = np.asarray(initial_amplitudes, dtype=complex).reshape(-1)
    if c0.shape[0] != k.dimension:
        raise DimensionMismatch(
            f"expected {k.dimension} amplitudes, got {c0.shape[0]}"
        )
    p0 = np.abs(c0) ** 2
    if abs(p0.sum() - 1.0) > 1e-10:
        raise ValueError("initial amplitudes must be normalized to 1e-10")

    if k.weak_value is None:
        raise ValueError("first-order Kraus operator carries no weak value")
    o_vals = k.meter_observable.spectrum.eigenvalues.real
    # exact per-round weights; |overlap|^2 cancels in the normalization
    weights = np.abs(1.0 - 1j * k.gt * k.weak_value * o_vals) ** 2
    log_w = np.where(weights > 0.0, np.log(np.where(weights > 0.0, weights, 1.0)), -np.inf)
    log_terms = np.where(p0 > 0.0, np.log(np.where(p0 > 0.0, p0, 1.0)), -np.inf) + n * log_w
    top = np.max(log_terms)
    if not np.isfinite(top):
        raise PostSelectionStarved(n, 0.0)
    terms = np.exp(log_terms - top)
    return terms / terms.sum()


def _qubit_c_d(k: KrausOperator, tol: Tolerances = DEFAULT) -> tuple[complex, complex]:
    """Decompose a qubit Kraus matrix as c*I + d*sigma_x, or fail loudly."""
    if k.dimension != 2:
        raise DimensionMismatch("Bloch recursion needs a qubit meter")
    if k.c is not None and k.d is not None:
        return k.c, k.d
    m = k.matrix
    c = (m[0, 0] + m[1, 1]) / 2.0
    d = (m[0, 1] + m[1, 0]) / 2.0
    residual = max(
        abs(m[0, 0] - m[1, 1]) / 2.0, abs(m[0, 1] - m[1, 0]) / 2.0
    )
    scale = max(float(np.linalg.norm(m)), 1.0)
    if residual > tol.verification * scale:
        raise ValueError("Kraus matrix is not of the c*I + d*sigma_x form")
    return complex(c), complex(d)


def bloch_step(
    k: KrausOperator, r: BlochVector, tol: Tolerances = DEFAULT
) -> BlochVector:
    """One round of the closed qubit recursion on the Bloch vector.

    With a = |c|^2 + |d|^2, b = c d*, e = c* d, f = |c|^2 - |d|^2:

        rx' = (a rx + (b+e)) / (a + (b+e) rx)
        ry' = (f ry + i(b-e) rz) / (a + (b+e) rx)
        rz' = (f rz - i(b-e) ry) / (a + (b+e) rx)

    The y/z coefficient is f, not a: that is what the matrix map gives, and it
    is the version that preserves purity. Output equals the Bloch vector of
    one ``iterate_matrix`` step to 1e-12.
    """
    c, d = _qubit_c_d(k, tol)
    a = abs(c) ** 2 + abs(d) ** 2
    b = c * d.conjugate()
    e = c.conjugate() * d
    bp = float((b + e).real)
    cross = float((1j * (b - e)).real)
    f = abs(c) ** 2 - abs(d) ** 2
    denom = a + bp * r.rx
    if abs(denom) < tol.starvation_floor:
        raise PostSelectionStarved(1, abs(denom))
    return BlochVector(
        rx=(a * r.rx + bp) / denom,
        ry=(f * r.ry + cross * r.rz) / denom,
        rz=(f * r.rz - cross * r.ry) / denom,
    )


def classify_fixed_points(
    k: KrausOperator, tol: Tolerances = DEFAULT
) -> FixedPointReport:
    """Eigenvectors of K with their stability.

    The eigenvector with strictly largest eigenvalue modulus is stable and
    the rest unstable; when the top two moduli are indistinguishable for the
    form (see ``moduli_degenerate``) every fixed point is marginal and the
    evolution is effectively unitary.
    """
    degenerate = moduli_degenerate(k, tol)
    points = []
    for j in range(k.dimension):
        vec = k.spectrum.eigenvectors[:, j]
        state = MeterState.pure(vec, tol=tol)
        if degenerate:
            stability = MARGINAL_UNITARY
        else:
            stability = STABLE if j == 0 else UNSTABLE
        bloch = state.bloch() if k.dimension == 2 else None
        points.append(FixedPoint(index=j, state=state, stability=stability, bloch=bloch))
    return FixedPointReport(tuple(points))


def long_time_state(
    k: KrausOperator, initial: MeterState, tol: Tolerances = DEFAULT
) -> MeterState:
    """The n -> infinity state: the projector onto the dominant eigenvector.

    Computed spectrally, not by iteration. Requires a unique dominant
    eigenvalue modulus and nonzero initial weight on its eigenvector.
    """
    _check_meter(k, initial)
    if moduli_degenerate(k, tol):
        raise NoDominantEigenvalue(
            "top two Kraus eigenvalue moduli coincide; no unique long-time state"
        )
    top = k.spectrum.eigenvectors[:, 0]
    weight = float(np.real(np.vdot(top, initial.rho @ top)))
    if weight <= 1e-12:
        raise UnstableManifoldStart(
            "initial state has no weight on the dominant eigenvector"
        )
    return MeterState.pure(top, tol=tol)


def classify_regime(
    k: KrausOperator,
    initial: MeterState | None = None,
    gap_scale: float | None = None,
    tol: Tolerances = DEFAULT,
) -> str:
    """Tag the dynamical regime of a qubit Kraus operator.

    unitary: the moduli are degenerate (no contraction at this form's
    resolution). near_unitary_spiral: relative gap below gt*gap_scale, so the
    per-step rotation outruns the contraction and trajectories cycle while
    collapsing. stable_flow_low/high otherwise, per which sigma_x eigenstate
    (low: x=-1, high: x=+1) is the stable fixed point.
    """
    if k.dimension != 2:
        raise DimensionMismatch("regime classification is defined for qubit meters")
    if gap_scale is None:
        gap_scale = tol.spiral_gap_scale
    if moduli_degenerate(k, tol):
        return REGIME_UNITARY
    mods = np.abs(k.spectrum.eigenvalues)
    gap_rel = float((mods[0] - mods[1]) / mods[0])
    top = k.spectrum.eigenvectors[:, 0]
    x_side = float(np.real(np.vdot(top, SIGMA_X @ top)))
    if gap_rel < k.gt * gap_scale:
        return REGIME_NEAR_UNITARY_SPIRAL
    return REGIME_STABLE_FLOW_HIGH if x_side > 0.0 else REGIME_STABLE_FLOW_LOW


def expectation(obs, state: MeterState, tol: Tolerances = DEFAULT) -> float:
    """Tr[obs * rho] for a Hermitian observable; the imaginary residue must be noise."""
    m = as_matrix(obs)
    if m.shape != state.rho.shape:
        raise DimensionMismatch(f"observable {m.shape} vs state {state.rho.shape}")
    if not is_hermitian(m, tol.hermiticity):
        raise NotHermitian("expectation needs a Hermitian observable")
    val = complex(np.trace(m @ state.rho))
    if abs(val.imag) >= 1e-10 * max(1.0, abs(val.real)):
        raise ValueError(f"expectation has non-negligible imaginary part {val.imag:.3e}")
    return float(val.real)
