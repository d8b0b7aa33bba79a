"""Brute-force simulation of the full system (x) meter protocol.

This module is the ground truth the Kraus-map implementation is checked
against, so it deliberately rebuilds everything from raw angles and plain
numpy: explicit joint state vector, the exact interaction unitary, explicit
post-selection projection and renormalization. It must never import the
protocol or dynamics modules (a test enforces that), and it is allowed to be
slow.

Joint-state index convention: system index major, meter index minor, i.e.
``vector[s * N + j]`` is the amplitude of |s> (x) |j>.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DimensionMismatch, NotHermitian, PostSelectionStarved
from .states import MeterState, TrajectoryRecord
from .tolerances import DEFAULT, Tolerances

_SX = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)


def _pure_meter_vector(state: MeterState, tol: float = 1e-10) -> np.ndarray:
    """The state vector of a pure meter state.

    Purifies through the dominant eigenvector when the purity deficit is
    within tolerance; a genuinely mixed input is an error, not something to
    silently repair.
    """
    deficit = 1.0 - state.purity()
    if deficit > tol:
        raise ValueError(
            f"oracle needs a pure meter state; purity deficit {deficit:.3e}"
        )
    evals, evecs = np.linalg.eigh(state.rho)
    return np.ascontiguousarray(evecs[:, int(np.argmax(evals))])


def _system_kets(theta: float, phi: float, alpha: float):
    prep = np.array([math.cos(theta), math.sin(theta)], dtype=complex)
    post = np.array(
        [math.cos(phi), np.exp(1j * alpha) * math.sin(phi)], dtype=complex
    )
    return prep, post


def bipartite_step(
    theta: float,
    phi: float,
    alpha: float,
    gt: float,
    meter_state: MeterState,
    observable=None,
    tol: Tolerances = DEFAULT,
) -> tuple[MeterState, float]:
    """One full protocol round, simulated on the joint state.

    Builds |Psi> = |psi_S> (x) |phi_A>, applies exp(-i*gt*sigma_z (x) O_A)
    exactly, projects the system onto |psi_f>, renormalizes, and returns the
    reduced meter state together with the post-selection probability.

    ``observable`` is the meter operator O_A: None selects the qubit
    sigma_x closed form cos(gt) I(x)I - i sin(gt) sigma_z (x) sigma_x; a
    Hermitian matrix is applied through its exact eigenphases
    e^{-i*gt*s*o_j} (s = +/-1 the sigma_z eigenvalue of the system component).
    """
    prep, post = _system_kets(theta, phi, alpha)
    meter = _pure_meter_vector(meter_state)
    n = meter.shape[0]

    joint = np.kron(prep, meter).reshape(2, n)

    if observable is None:
        if n != 2:
            raise DimensionMismatch("closed-form interaction needs a qubit meter")
        evolved = math.cos(gt) * joint.copy()
        evolved[0] += -1j * math.sin(gt) * (_SX @ joint[0])
        evolved[1] += +1j * math.sin(gt) * (_SX @ joint[1])
    else:
        obs = np.asarray(observable, dtype=complex)
        if obs.shape != (n, n):
            raise DimensionMismatch(f"observable {obs.shape} vs meter dim {n}")
        if float(np.max(np.abs(obs - obs.conj().T))) > 1e-12 * max(
            1.0, float(np.linalg.norm(obs))
        ):
            raise NotHermitian("meter observable must be Hermitian")
        o_vals, o_vecs = np.linalg.eigh(obs)
        evolved = np.empty_like(joint)
        for s, sign in ((0, +1.0), (1, -1.0)):
            comp = o_vecs.conj().T @ joint[s]
            comp = comp * np.exp(-1j * gt * sign * o_vals)
            evolved[s] = o_vecs @ comp

    reduced = post.conjugate() @ evolved
    prob = float(np.vdot(reduced, reduced).real)
    if prob < tol.starvation_floor:
        raise PostSelectionStarved(1, prob)
    return MeterState.pure(reduced / math.sqrt(prob), tol=tol), prob


def bipartite_run(
    theta: float,
    phi: float,
    alpha: float,
    gt: float,
    initial: MeterState,
    n: int,
    observable=None,
    tol: Tolerances = DEFAULT,
) -> TrajectoryRecord:
    """Apply ``bipartite_step`` n times, renewing the system each round.

    The meter is retained across rounds; each round starts from a fresh
    system preparation, exactly as the protocol prescribes.
    """
    if n < 0:
        raise ValueError("iteration count must be nonnegative")
    steps = [initial]
    state = initial
    for step in range(1, n + 1):
        try:
            state, _prob = bipartite_step(theta, phi, alpha, gt, state, observable, tol)
        except PostSelectionStarved as exc:
            exc.step = step
            exc.record = TrajectoryRecord(tuple(steps), None, None)
            raise
        steps.append(state)
    return TrajectoryRecord(
        tuple(steps),
        parameters={"theta": theta, "phi": phi, "alpha": alpha, "gt": gt},
        converged_at=None,
    )
