"""Relaxation times, phi sweeps, and critical-exponent fits.

The relaxation time of the iterated map is set by the two leading Kraus
eigenvalue moduli: matching the discrete decay (|lambda_2|^2/|lambda_1|^2)^n
to e^{-n/tau} gives tau = 1/|log R| with R = |lambda_1|^2/|lambda_2|^2. R -> 1
at a critical post-selection angle, so tau diverges there; fitting log(tau)
against log|phi - phi_c| measures the critical exponent (slope -1 everywhere
the protocol's assumptions hold).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .dynamics import evolve_state, expectation
from .errors import (
    DegenerateMeterObservable,
    DimensionTooSmall,
    PoorFit,
    PostSelectionStarved,
    VanishingOverlap,
    WindowContainsCriticalPoint,
)
from .linalg import SIGMA_X
from .protocol import CouplingSpec, KrausOperator, ProtocolConfig, WeakValue
from .states import MeterState
from .tolerances import DEFAULT, Tolerances

BELOW = "below"
ABOVE = "above"


def relaxation_time(k: KrausOperator, tol: Tolerances = DEFAULT) -> float:
    """tau = 1 / |log(|lambda_1|^2 / |lambda_2|^2)| (natural log).

    Returns math.inf -- from an explicit branch, never an overflow -- when
    the two leading moduli agree to ``moduli_equal_rtol`` relative.
    """
    mods = np.abs(k.spectrum.eigenvalues)
    if mods.size < 2:
        raise DimensionTooSmall("relaxation time needs at least two eigenvalues")
    m1, m2 = float(mods[0]), float(mods[1])
    if m1 == 0.0:
        return math.inf
    rel = (m1 - m2) / m1
    if rel <= tol.moduli_equal_rtol:
        return math.inf
    log_r = 2.0 * math.log1p((m1 - m2) / m2)
    return 1.0 / log_r


def analytic_tau_first_order(
    wv: WeakValue, coupling: CouplingSpec, o1: float, o2: float
) -> float:
    """Closed first-order form tau = 1 / |2*gt*Im(O_w)*(o1 - o2)|.

    o1 and o2 are the meter-observable eigenvalues paired with the two
    leading Kraus moduli. Infinite exactly when Im(O_w) = 0 (or gt = 0).
    """
    if o1 == o2:
        raise DegenerateMeterObservable("o1 = o2 makes the first-order tau undefined")
    im = wv.imaginary_part
    gt = coupling.gt
    if im == 0.0 or gt == 0.0:
        return math.inf
    return 1.0 / abs(2.0 * gt * im * (o1 - o2))


@dataclass(frozen=True)
class SweepRow:
    """One (phi, n) sample of a sweep; None marks a per-point failure."""

    phi: float
    n: int
    expectations: tuple[float | None, ...]
    abs_lambda_1: float | None
    abs_lambda_2: float | None
    im_weak_value: float | None
    tau: float | None


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    observable_names: tuple[str, ...]
    parameters: dict | None = None


def sweep_phi(
    config: ProtocolConfig,
    initial: MeterState,
    phi_grid: Sequence[float],
    n_list: Sequence[int],
    observables: Sequence[tuple[str, np.ndarray]] | None = None,
    jobs: int = 1,
    tol: Tolerances = DEFAULT,
) -> SweepResult:
    """Evaluate the protocol across a phi grid for each iteration count.

    Per grid point: build the Kraus operator, record the two leading
    eigenvalue moduli, Im(weak value) and tau, then the n-step expectation of
    each requested observable. Failures (vanishing overlap, post-selection
    starvation) are recorded in-row as missing values and never abort the
    sweep. Rows are ordered phi-major, then by n, regardless of ``jobs``.
    """
    grid = [float(p) for p in phi_grid]
    if not grid:
        raise ValueError("phi grid must not be empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("phi grid must be strictly increasing")
    ns = [int(n) for n in n_list]
    if not ns or any(n < 0 for n in ns):
        raise ValueError("iteration counts must be nonnegative and nonempty")
    if observables is None:
        if initial.dimension == 2:
            observables = [("sigma_x", SIGMA_X)]
        else:
            observables = [("meter_obs", config.meter_obs.matrix)]
    names = tuple(name for name, _ in observables)
    matrices = [np.asarray(m, dtype=complex) for _, m in observables]

    def rows_at(phi: float) -> list[SweepRow]:
        try:
            k = config.kraus(phi)
        except VanishingOverlap:
            blank = tuple(None for _ in matrices)
            return [
                SweepRow(phi, n, blank, None, None, None, None) for n in ns
            ]
        mods = np.abs(k.spectrum.eigenvalues)
        im = None if k.weak_value is None else float(k.weak_value.imag)
        tau = relaxation_time(k, tol)
        out = []
        for n in ns:
            try:
                state = evolve_state(k, initial, n, tol)
                exps = tuple(float(expectation(m, state, tol)) for m in matrices)
            except PostSelectionStarved:
                exps = tuple(None for _ in matrices)
            out.append(
                SweepRow(phi, n, exps, float(mods[0]), float(mods[1]), im, tau)
            )
        return out

    groups = _ordered_map(rows_at, grid, jobs)
    rows = tuple(row for group in groups for row in group)
    return SweepResult(rows=rows, observable_names=names)


@dataclass(frozen=True)
class RelaxationProfile:
    """tau sampled over a strictly increasing phi grid."""

    samples: tuple[tuple[float, float | None], ...]
    parameters: dict | None = None


def relaxation_profile(
    config: ProtocolConfig,
    phi_grid: Sequence[float],
    jobs: int = 1,
    tol: Tolerances = DEFAULT,
) -> RelaxationProfile:
    """Relaxation time at every grid point (math.inf at divergences)."""
    grid = [float(p) for p in phi_grid]
    if not grid:
        raise ValueError("phi grid must not be empty")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("phi grid must be strictly increasing")

    def tau_at(phi: float) -> tuple[float, float | None]:
        try:
            return phi, relaxation_time(config.kraus(phi), tol)
        except VanishingOverlap:
            return phi, None

    samples = tuple(_ordered_map(tau_at, grid, jobs))
    return RelaxationProfile(samples=samples)


@dataclass(frozen=True)
class ExponentFit:
    """Ordinary least squares of log(tau) against log|phi - phi_c|."""

    phi_c: float
    side: str
    offsets: tuple[float, ...]
    taus: tuple[float, ...]
    slope: float
    intercept: float
    r_squared: float

    @property
    def nu(self) -> float:
        return -self.slope


def default_offsets(
    lo: float = 1e-4, hi: float = 1e-2, per_decade: int = 20
) -> np.ndarray:
    """Log-spaced offsets |phi - phi_c|, ``per_decade`` points per decade."""
    if not 0.0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    decades = math.log10(hi / lo)
    count = int(round(per_decade * decades)) + 1
    return np.logspace(math.log10(lo), math.log10(hi), count)


def fit_exponent(
    tau_fn: Callable[[float], float],
    phi_c: float,
    side: str,
    offsets: Sequence[float] | None = None,
    tol: Tolerances = DEFAULT,
) -> ExponentFit:
    """Fit tau(phi_c +/- offset) ~ offset^(-nu) on log-log axes.

    ``tau_fn`` evaluates the relaxation time at an absolute phi. Any infinite
    tau inside the window means the window strayed onto another critical
    point; an r-squared below the acceptance threshold raises PoorFit with
    the rejected fit attached.
    """
    if side not in (BELOW, ABOVE):
        raise ValueError(f"side must be '{BELOW}' or '{ABOVE}', got {side!r}")
    offs = np.asarray(
        default_offsets() if offsets is None else list(offsets), dtype=float
    )
    if offs.size < 3 or np.any(offs <= 0.0) or np.any(np.diff(offs) <= 0.0):
        raise ValueError("offsets must be at least three increasing positive values")
    sign = 1.0 if side == ABOVE else -1.0
    taus = np.array([float(tau_fn(phi_c + sign * off)) for off in offs])
    if np.any(np.isinf(taus)):
        bad = float(offs[int(np.argmax(np.isinf(taus)))])
        raise WindowContainsCriticalPoint(
            f"tau is infinite at offset {bad:.3e} from phi_c = {phi_c}"
        )
    x = np.log(offs)
    y = np.log(taus)
    slope, intercept = np.polyfit(x, y, 1)
    residuals = y - (slope * x + intercept)
    ss_res = float(np.sum(residuals**2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    fit = ExponentFit(
        phi_c=float(phi_c),
        side=side,
        offsets=tuple(float(o) for o in offs),
        taus=tuple(float(t) for t in taus),
        slope=float(slope),
        intercept=float(intercept),
        r_squared=float(r_squared),
    )
    if r_squared < tol.fit_r2_threshold:
        raise PoorFit(
            f"r^2 = {r_squared:.6f} below threshold {tol.fit_r2_threshold}", fit=fit
        )
    return fit


def _ordered_map(fn, items, jobs: int):
    """Map preserving order, optionally across a thread pool."""
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))
