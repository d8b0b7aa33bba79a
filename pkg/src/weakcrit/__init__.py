"""Repeated weak-measurement protocol with post-selection, on an N-level meter.

The package simulates the iterated Kraus map the protocol induces on the
meter, classifies its fixed points and dynamical regimes, locates the
critical post-selection angles where the imaginary part of the weak value
vanishes, and measures the relaxation-time critical exponent. A brute-force
bipartite simulator (``weakcrit.bipartite``) provides ground truth for all of
it, and the ``weakcrit`` CLI emits deterministic CSV/JSON artifacts.
"""

from .bipartite import bipartite_run, bipartite_step
from .criticality import (
    ABOVE,
    BELOW,
    ExponentFit,
    RelaxationProfile,
    SweepResult,
    SweepRow,
    analytic_tau_first_order,
    default_offsets,
    fit_exponent,
    relaxation_profile,
    relaxation_time,
    sweep_phi,
)
from .dynamics import (
    MARGINAL_UNITARY,
    REGIME_NEAR_UNITARY_SPIRAL,
    REGIME_STABLE_FLOW_HIGH,
    REGIME_STABLE_FLOW_LOW,
    REGIME_UNITARY,
    STABLE,
    UNSTABLE,
    FixedPoint,
    FixedPointReport,
    bloch_step,
    classify_fixed_points,
    classify_regime,
    evolve_state,
    expectation,
    iterate_amplitudes,
    iterate_matrix,
    long_time_state,
)
from .errors import (
    ConfigError,
    CouplingTooStrong,
    DegenerateMeterObservable,
    DegenerateSpectrum,
    DimensionMismatch,
    DimensionTooSmall,
    NoDominantEigenvalue,
    NotHermitian,
    PoorFit,
    PostSelectionStarved,
    UnstableManifoldStart,
    VanishingOverlap,
    WeakcritError,
    WindowContainsCriticalPoint,
)
from .linalg import (
    IDENTITY_2,
    MINUS,
    PLUS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    SpectralDecomposition,
    eig2x2,
    hermitian_eig,
    is_hermitian,
    is_unitary,
    trace_distance,
)
from .protocol import (
    ALL_CRITICAL,
    EXACT_QUBIT,
    FIRST_ORDER,
    AllCritical,
    CouplingSpec,
    KrausOperator,
    MeterObservable,
    PostSelection,
    ProtocolConfig,
    SystemPreparation,
    WeakValue,
    eigenvalue_moduli_gap,
    find_critical_angles,
    kraus_exact_qubit,
    kraus_first_order,
    moduli_degenerate,
    overlap,
    weak_value,
)
from .states import BlochVector, MeterState, TrajectoryRecord
from .tolerances import DEFAULT, Tolerances

__version__ = "0.1.0"
