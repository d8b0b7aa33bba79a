"""Minimal dense complex linear algebra for small matrices.

Provides the pieces the rest of the package needs: Pauli constants, Hermiticity
and unitarity predicates, closed-form eigendecomposition of general 2x2
matrices, a cyclic Jacobi eigensolver for Hermitian N x N matrices (N up to a
few dozen), and the trace distance between density operators.

Conventions fixed here and relied on everywhere else:

* eigenvalues are sorted by descending modulus, ties broken by descending real
  part, then descending imaginary part;
* each eigenvector's global phase is fixed by making its largest-modulus
  component real and positive (first such component on ties).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpectrum, DimensionMismatch, NotHermitian
from .tolerances import DEFAULT, Tolerances

SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)
for _m in (SIGMA_X, SIGMA_Y, SIGMA_Z, IDENTITY_2):
    _m.setflags(write=False)

#: |+> and |->, the sigma_x eigenvectors, with the package phase convention.
PLUS = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
MINUS = np.array([1.0, -1.0], dtype=complex) / math.sqrt(2.0)
PLUS.setflags(write=False)
MINUS.setflags(write=False)


def as_matrix(m) -> np.ndarray:
    """Coerce to a 2-D complex array, rejecting anything else."""
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got ndim={a.ndim}")
    return a


def is_hermitian(m, tol: float = DEFAULT.hermiticity) -> bool:
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        return False
    scale = max(float(np.linalg.norm(a)), 1.0)
    return float(np.max(np.abs(a - a.conj().T))) <= tol * scale


def is_unitary(m, tol: float = DEFAULT.verification) -> bool:
    a = as_matrix(m)
    if a.shape[0] != a.shape[1]:
        return False
    eye = np.eye(a.shape[0])
    return float(np.max(np.abs(a.conj().T @ a - eye))) <= tol


def canonical_phase(v: np.ndarray) -> np.ndarray:
    """Rotate a vector's global phase so its largest-modulus entry is real > 0."""
    idx = int(np.argmax(np.abs(v)))
    pivot = v[idx]
    mag = abs(pivot)
    if mag == 0.0:
        return v
    return v * (pivot.conjugate() / mag)


def _sort_order(eigenvalues: np.ndarray) -> np.ndarray:
    """Indices sorting by (|lambda| desc, Re desc, Im desc); total and stable."""
    return np.lexsort((-eigenvalues.imag, -eigenvalues.real, -np.abs(eigenvalues)))


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenvalues and unit-norm eigenvectors, in the package sort order.

    ``eigenvectors[:, j]`` belongs to ``eigenvalues[j]``.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def __post_init__(self):
        self.eigenvalues.setflags(write=False)
        self.eigenvectors.setflags(write=False)

    @property
    def moduli_gap(self) -> float:
        """|lambda_1| - |lambda_2| (zero for a one-dimensional spectrum)."""
        mods = np.abs(self.eigenvalues)
        if mods.size < 2:
            return 0.0
        return float(mods[0] - mods[1])

    def reconstruct(self) -> np.ndarray:
        """Sum of lambda_j v_j v_j^dagger (reproduces normal inputs)."""
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def _finalize(vals: np.ndarray, vecs: np.ndarray) -> SpectralDecomposition:
    order = _sort_order(vals)
    vals = np.ascontiguousarray(vals[order])
    vecs = vecs[:, order].copy()
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        col /= np.linalg.norm(col)
        vecs[:, j] = canonical_phase(col)
    return SpectralDecomposition(eigenvalues=vals, eigenvectors=vecs)


def eig2x2(m, tol: Tolerances = DEFAULT) -> SpectralDecomposition:
    """Closed-form eigendecomposition of a general 2x2 complex matrix.

    Eigenvalues come from the quadratic formula on the characteristic
    polynomial. A repeated eigenvalue is only accepted for scalar multiples of
    the identity (canonical basis eigenvectors); a defective matrix raises
    DegenerateSpectrum.
    """
    a = as_matrix(m)
    if a.shape != (2, 2):
        raise DimensionMismatch(f"eig2x2 needs a 2x2 matrix, got {a.shape}")
    m00, m01 = a[0, 0], a[0, 1]
    m10, m11 = a[1, 0], a[1, 1]
    tr = m00 + m11
    det = m00 * m11 - m01 * m10
    root = np.sqrt(complex(tr * tr - 4.0 * det))
    lam1 = (tr + root) / 2.0
    lam2 = (tr - root) / 2.0

    scale = max(float(np.linalg.norm(a)), 1.0)
    if abs(lam1 - lam2) <= tol.hermiticity * scale:
        off = max(abs(m01), abs(m10), abs(m00 - m11))
        if off <= tol.hermiticity * scale:
            lam = tr / 2.0
            vals = np.array([lam, lam], dtype=complex)
            return _finalize(vals, np.eye(2, dtype=complex))
        raise DegenerateSpectrum(
            "2x2 matrix is defective (repeated eigenvalue, single eigenvector)"
        )

    vecs = np.empty((2, 2), dtype=complex)
    for j, lam in enumerate((lam1, lam2)):
        cand_a = np.array([m01, lam - m00])
        cand_b = np.array([lam - m11, m10])
        v = cand_a if np.linalg.norm(cand_a) >= np.linalg.norm(cand_b) else cand_b
        vecs[:, j] = v
    return _finalize(np.array([lam1, lam2]), vecs)


def hermitian_eig(m, tol: Tolerances = DEFAULT) -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian matrix by cyclic complex Jacobi.

    The input must be Hermitian within ``tol.hermiticity`` (relative to its
    norm), otherwise NotHermitian is raised. Sweeps stop once every
    off-diagonal magnitude is below ``tol.jacobi_offdiag`` times the Frobenius
    norm of the input. Eigenvalues are exactly real; eigenvectors orthonormal.
    """
    a = as_matrix(m)
    n = a.shape[0]
    if a.shape[0] != a.shape[1]:
        raise DimensionMismatch(f"hermitian_eig needs a square matrix, got {a.shape}")
    if not is_hermitian(a, tol.hermiticity):
        raise NotHermitian("matrix is not Hermitian within tolerance")

    a = (a + a.conj().T) / 2.0
    v = np.eye(n, dtype=complex)
    norm = float(np.linalg.norm(a))
    if norm == 0.0 or n == 1:
        return _finalize(np.diag(a).astype(complex), v)
    thresh = tol.jacobi_offdiag * norm

    for _sweep in range(100):
        off = a - np.diag(np.diag(a))
        if float(np.max(np.abs(off))) < thresh:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                b = abs(apq)
                if b < thresh * 1e-2:
                    continue
                phase = apq / b
                app = a[p, p].real
                aqq = a[q, q].real
                # annihilate the (p, q) entry: phase rotation to a real
                # symmetric 2x2 block, then the classic stable Jacobi angle
                tau = (aqq - app) / (2.0 * b)
                if tau >= 0.0:
                    t = 1.0 / (tau + math.sqrt(1.0 + tau * tau))
                else:
                    t = -1.0 / (-tau + math.sqrt(1.0 + tau * tau))
                c = 1.0 / math.sqrt(1.0 + t * t)
                s = t * c
                w = np.array(
                    [[c, s], [-s * np.conj(phase), c * np.conj(phase)]],
                    dtype=complex,
                )
                a[:, [p, q]] = a[:, [p, q]] @ w
                a[[p, q], :] = w.conj().T @ a[[p, q], :]
                v[:, [p, q]] = v[:, [p, q]] @ w
    else:
        raise RuntimeError("Jacobi iteration failed to converge in 100 sweeps")

    vals = np.diag(a).real.astype(complex)
    return _finalize(vals, v)


def trace_distance(a, b, tol: Tolerances = DEFAULT) -> float:
    """Half the sum of singular values of ``a - b`` (density operators).

    Accepts density matrices or MeterState-like objects exposing ``.rho``.
    Symmetric and zero iff the operators coincide. The difference of two
    Hermitian operators is Hermitian, so singular values are |eigenvalues|;
    the 2x2 case uses the closed form.
    """
    ma = as_matrix(getattr(a, "rho", a))
    mb = as_matrix(getattr(b, "rho", b))
    if ma.shape != mb.shape:
        raise DimensionMismatch(f"shape mismatch: {ma.shape} vs {mb.shape}")
    d = ma - mb
    if d.shape == (2, 2):
        x = float(d[0, 0].real)
        y = float(d[1, 1].real)
        z = complex(d[0, 1])
        half = (x + y) / 2.0
        r = math.sqrt(((x - y) / 2.0) ** 2 + (z.real**2 + z.imag**2))
        return (abs(half + r) + abs(half - r)) / 2.0
    dec = hermitian_eig(d, tol)
    return float(np.sum(np.abs(dec.eigenvalues.real))) / 2.0
