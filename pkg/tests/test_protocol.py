import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from weakcrit import (
    ALL_CRITICAL,
    CouplingSpec,
    CouplingTooStrong,
    MeterObservable,
    PostSelection,
    SIGMA_X,
    SIGMA_Z,
    SystemPreparation,
    VanishingOverlap,
    eig2x2,
    eigenvalue_moduli_gap,
    find_critical_angles,
    kraus_exact_qubit,
    kraus_first_order,
    moduli_degenerate,
    overlap,
    weak_value,
)

PREP = SystemPreparation(math.pi / 4)


def kets(theta, phi, alpha):
    prep = np.array([math.cos(theta), math.sin(theta)], dtype=complex)
    post = np.array([math.cos(phi), cmath.exp(1j * alpha) * math.sin(phi)], dtype=complex)
    return prep, post


class TestWeakValue:
    def test_post_is_zero_state(self):
        wv = weak_value(PREP, PostSelection(phi=0.0, alpha=math.pi / 7), SIGMA_Z)
        assert wv.value == pytest.approx(1.0, abs=1e-14)

    def test_post_is_one_state(self):
        wv = weak_value(PREP, PostSelection(phi=math.pi / 2, alpha=math.pi / 7), SIGMA_Z)
        assert wv.value == pytest.approx(-1.0, abs=1e-14)

    def test_imaginary_unit(self):
        # (u - v)/(u + v) with u = 1/2, v = -i/2
        wv = weak_value(PREP, PostSelection(phi=math.pi / 4, alpha=math.pi / 2), SIGMA_Z)
        assert wv.value == pytest.approx(1j, abs=1e-14)
        assert wv.imaginary_part == pytest.approx(1.0, abs=1e-14)

    def test_vanishing_overlap(self):
        # alpha = pi makes <f|i> = cos(theta + phi); orthogonal at phi = pi/4
        with pytest.raises(VanishingOverlap) as err:
            weak_value(PREP, PostSelection(phi=math.pi / 4, alpha=math.pi), SIGMA_Z)
        assert err.value.magnitude <= 1e-12

    @settings(max_examples=60, deadline=None)
    @given(
        theta=st.floats(0.05, math.pi / 2 - 0.05),
        phi=st.floats(0.05, math.pi - 0.05),
        alpha=st.floats(0.0, 2 * math.pi - 1e-9),
        chi=st.floats(0.0, 2 * math.pi),
        mu=st.floats(0.0, 2 * math.pi),
    )
    def test_global_phase_invariance(self, theta, phi, alpha, chi, mu):
        prep = SystemPreparation(theta)
        post = PostSelection(phi=phi, alpha=alpha)
        if abs(overlap(prep, post)) < 1e-6:
            return
        wv = weak_value(prep, post, SIGMA_Z)
        pk, fk = kets(theta, phi, alpha)
        pk = pk * cmath.exp(1j * mu)
        fk = fk * cmath.exp(1j * chi)
        direct = np.vdot(fk, SIGMA_Z @ pk) / np.vdot(fk, pk)
        assert abs(direct - wv.value) <= 1e-12


class TestKrausFirstOrder:
    OBS = MeterObservable.sigma_x()

    def wv(self, phi, alpha):
        return weak_value(PREP, PostSelection(phi=phi, alpha=alpha), SIGMA_Z)

    def test_zero_coupling_is_overlap_times_identity(self):
        post = PostSelection(phi=0.7, alpha=0.3)
        ov = overlap(PREP, post)
        k = kraus_first_order(ov, self.wv(0.7, 0.3), CouplingSpec.from_gt(0.0), self.OBS)
        assert np.allclose(k.matrix, ov * np.eye(2))
        assert moduli_degenerate(k)

    def test_real_weak_value_moduli_equal_to_first_order(self):
        # alpha = 0 keeps the weak value real
        post = PostSelection(phi=0.9, alpha=0.0)
        gt = 0.01
        k = kraus_first_order(
            overlap(PREP, post), self.wv(0.9, 0.0), CouplingSpec.from_gt(gt), self.OBS
        )
        mods = np.abs(k.spectrum.eigenvalues)
        scale = abs(k.overlap)
        assert abs(mods[0] - mods[1]) <= 10 * gt**2 * scale

    def test_moduli_ratio_for_imaginary_weak_value(self):
        # O_w = i at theta=pi/4, phi=pi/4, alpha=pi/2; |1 -/+ i*gt*i|^2 = (1 +/- gt)^2
        gt = 0.01
        post = PostSelection(phi=math.pi / 4, alpha=math.pi / 2)
        k = kraus_first_order(
            overlap(PREP, post), self.wv(math.pi / 4, math.pi / 2),
            CouplingSpec.from_gt(gt), self.OBS,
        )
        mods = np.abs(k.spectrum.eigenvalues)
        ratio = (mods[0] / mods[1]) ** 2
        assert ratio == pytest.approx((1 + gt) ** 2 / (1 - gt) ** 2, rel=1e-12)

    def test_weakness_bound(self):
        post = PostSelection(phi=0.7, alpha=0.3)
        with pytest.raises(CouplingTooStrong):
            kraus_first_order(
                overlap(PREP, post), self.wv(0.7, 0.3), CouplingSpec.from_gt(0.2), self.OBS
            )

    def test_eigenvectors_coincide_with_observable(self):
        rng = np.random.default_rng(61)
        obs5 = MeterObservable.diagonal([2.0, 1.0, 0.0, -1.0, -2.0])
        for _ in range(50):
            theta = rng.uniform(0.05, math.pi / 2 - 0.05)
            phi = rng.uniform(0.05, math.pi - 0.05)
            alpha = rng.uniform(0.0, 2 * math.pi)
            prep = SystemPreparation(theta)
            post = PostSelection(phi=phi, alpha=alpha)
            ov = overlap(prep, post)
            if abs(ov) < 0.05:
                continue
            wv = weak_value(prep, post, SIGMA_Z)
            for obs in (self.OBS, obs5):
                k = kraus_first_order(ov, wv, CouplingSpec.from_gt(0.01), obs)
                for j in range(obs.dimension):
                    v = k.spectrum.eigenvectors[:, j]
                    resid = np.linalg.norm(k.matrix @ v - k.spectrum.eigenvalues[j] * v)
                    assert resid <= 1e-10 * np.linalg.norm(k.matrix)
                    ov_match = abs(
                        np.vdot(obs.matrix @ v, v) - k.observable_eigenvalues[j]
                    )
                    assert ov_match <= 1e-10

    def test_matches_dense_eig_for_qubit(self):
        post = PostSelection(phi=1.1, alpha=0.8)
        k = kraus_first_order(
            overlap(PREP, post), self.wv(1.1, 0.8), CouplingSpec.from_gt(0.02), self.OBS
        )
        dense = eig2x2(k.matrix)
        assert np.allclose(dense.eigenvalues, k.spectrum.eigenvalues, atol=1e-13)


class TestKrausExactQubit:
    COUPLING = CouplingSpec(0.1, 1.0)

    def test_zero_coupling(self):
        post = PostSelection(phi=0.8, alpha=0.4)
        k = kraus_exact_qubit(PREP, post, CouplingSpec.from_gt(0.0))
        assert k.d == 0
        assert np.allclose(k.matrix, overlap(PREP, post) * np.eye(2))

    def test_phi_half_pi_proportional_to_unitary(self):
        post = PostSelection(phi=math.pi / 2, alpha=math.pi / 7)
        k = kraus_exact_qubit(PREP, post, self.COUPLING)
        scale = abs(k.spectrum.eigenvalues[0])
        assert np.allclose(
            (k.matrix.conj().T @ k.matrix) / scale**2, np.eye(2), atol=1e-12
        )
        mods = np.abs(k.spectrum.eigenvalues)
        assert abs(mods[0] - mods[1]) <= 1e-14

    def test_structure_c_i_plus_d_sigma_x(self):
        post = PostSelection(phi=1.0, alpha=math.pi / 7)
        k = kraus_exact_qubit(PREP, post, self.COUPLING)
        assert np.allclose(k.matrix, k.c * np.eye(2) + k.d * SIGMA_X, atol=0)
        # fixed eigenvectors |+>, |-> regardless of parameters
        s = 1 / math.sqrt(2)
        assert np.allclose(np.abs(k.spectrum.eigenvectors), s, atol=1e-15)

    def test_first_order_consistency_grid(self):
        # ||K_exact - K_first_order|| <= 10 (gt)^2 over a 100-point grid
        gt = 1e-3
        obs = MeterObservable.sigma_x()
        count = 0
        for theta in np.linspace(0.1, 1.4, 5):
            for phi in np.linspace(0.15, 2.9, 5):
                for alpha in np.linspace(0.0, 5.8, 4):
                    prep = SystemPreparation(float(theta))
                    post = PostSelection(phi=float(phi), alpha=float(alpha))
                    ov = overlap(prep, post)
                    if abs(ov) < 1e-3:
                        continue
                    wv = weak_value(prep, post, SIGMA_Z)
                    exact = kraus_exact_qubit(prep, post, CouplingSpec.from_gt(gt))
                    first = kraus_first_order(ov, wv, CouplingSpec.from_gt(gt), obs)
                    diff = np.linalg.norm(exact.matrix - first.matrix)
                    assert diff <= 10 * gt**2
                    count += 1
        assert count >= 90


class TestModuliGap:
    def test_degenerate_observable_gap_zero(self):
        obs = MeterObservable.diagonal([1.0, 1.0])
        assert not obs.nondegenerate
        post = PostSelection(phi=0.9, alpha=0.5)
        wv = weak_value(PREP, post, SIGMA_Z)
        k = kraus_first_order(overlap(PREP, post), wv, CouplingSpec.from_gt(0.01), obs)
        assert eigenvalue_moduli_gap(k) == pytest.approx(0.0, abs=1e-15)

    def test_gap_vanishes_exactly_at_criticals_only(self):
        coupling = CouplingSpec(0.1, 1.0)
        grid = np.linspace(0.0, math.pi, 2001)
        zero_gap = []
        for phi in grid:
            k = kraus_exact_qubit(PREP, PostSelection(phi=float(phi), alpha=math.pi / 7), coupling)
            if eigenvalue_moduli_gap(k) < 1e-12:
                zero_gap.append(float(phi))
        assert len(zero_gap) == 3
        assert np.allclose(zero_gap, [0.0, math.pi / 2, math.pi], atol=2e-3)

    def test_gap_iff_imaginary_part_first_order(self):
        gt = 0.01
        obs = MeterObservable.sigma_x()
        for phi in np.linspace(0.05, math.pi - 0.05, 40):
            post = PostSelection(phi=float(phi), alpha=math.pi / 7)
            ov = overlap(PREP, post)
            wv = weak_value(PREP, post, SIGMA_Z)
            k = kraus_first_order(ov, wv, CouplingSpec.from_gt(gt), obs)
            gap = eigenvalue_moduli_gap(k)
            first_order_gap = abs(ov) * abs(gt * wv.imaginary_part * 2.0)
            assert abs(gap - first_order_gap) <= 10 * gt**2


class TestCriticalAngles:
    def test_standard_configuration(self):
        angles = find_critical_angles(PREP, math.pi / 7)
        assert len(angles) == 3
        assert angles[0] == pytest.approx(0.0, abs=1e-9)
        assert angles[1] == pytest.approx(math.pi / 2, abs=1e-9)
        assert angles[2] == pytest.approx(math.pi, abs=1e-9)

    def test_real_weak_value_everywhere(self):
        assert find_critical_angles(PREP, 0.0) is ALL_CRITICAL

    def test_zeros_independent_of_theta(self):
        angles = find_critical_angles(SystemPreparation(math.pi / 3), math.pi / 5)
        assert len(angles) == 3
        assert angles[0] == pytest.approx(0.0, abs=1e-9)
        assert angles[1] == pytest.approx(math.pi / 2, abs=1e-9)
        assert angles[2] == pytest.approx(math.pi, abs=1e-9)

    def test_grid_size_validation(self):
        with pytest.raises(ValueError):
            find_critical_angles(PREP, math.pi / 7, grid_size=8)


class TestValidation:
    def test_theta_range(self):
        with pytest.raises(ValueError):
            SystemPreparation(-0.1)
        with pytest.raises(ValueError):
            SystemPreparation(math.pi / 2 + 0.1)

    def test_coupling_nonnegative(self):
        with pytest.raises(ValueError):
            CouplingSpec(-0.1, 1.0)

    def test_coupling_gt_product(self):
        assert CouplingSpec(0.5, 0.02).gt == pytest.approx(0.01)
