import math

import numpy as np
import pytest

from weakcrit import (
    BlochVector,
    CouplingSpec,
    MARGINAL_UNITARY,
    MeterObservable,
    MeterState,
    NoDominantEigenvalue,
    NotHermitian,
    PostSelection,
    REGIME_NEAR_UNITARY_SPIRAL,
    REGIME_STABLE_FLOW_HIGH,
    REGIME_STABLE_FLOW_LOW,
    REGIME_UNITARY,
    SIGMA_X,
    SIGMA_Z,
    STABLE,
    SystemPreparation,
    UNSTABLE,
    UnstableManifoldStart,
    bipartite_run,
    bloch_step,
    classify_fixed_points,
    classify_regime,
    eigenvalue_moduli_gap,
    evolve_state,
    expectation,
    iterate_amplitudes,
    iterate_matrix,
    kraus_exact_qubit,
    kraus_first_order,
    long_time_state,
    overlap,
    trace_distance,
    weak_value,
)
from weakcrit.criticality import relaxation_time

PREP = SystemPreparation(math.pi / 4)
ALPHA = math.pi / 7
STRONG = CouplingSpec(0.1, 1.0)


def exact_k(phi, coupling=STRONG):
    return kraus_exact_qubit(PREP, PostSelection(phi=phi, alpha=ALPHA), coupling)


def first_order_k(phi, gt, obs=None, theta=math.pi / 4, alpha=ALPHA):
    prep = SystemPreparation(theta)
    post = PostSelection(phi=phi, alpha=alpha)
    obs = obs or MeterObservable.sigma_x()
    return kraus_first_order(
        overlap(prep, post), weak_value(prep, post, SIGMA_Z), CouplingSpec.from_gt(gt), obs
    )


def random_pure(rng, n=2):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return MeterState.pure(v)


class TestIterateMatrix:
    def test_n_zero_returns_initial_alone(self):
        init = MeterState.from_bloch((0.0, 0.0, 1.0))
        rec = iterate_matrix(exact_k(1.0), init, 0)
        assert len(rec.steps) == 1
        assert rec.steps[0] is init

    def test_unitary_point_keeps_rx_and_radius(self):
        k = exact_k(math.pi / 2)
        init = MeterState.from_bloch((math.sqrt(0.5), 0.0, math.sqrt(0.5)))
        rec = iterate_matrix(k, init, 2000)
        rx0 = init.bloch().rx
        for state in rec.steps[::100]:
            b = state.bloch()
            assert abs(b.rx - rx0) <= 1e-10
            assert abs(b.norm - 1.0) <= 1e-10

    def test_eigenvector_is_stationary(self):
        k = exact_k(1.0)
        minus = MeterState.pure(np.array([1.0, -1.0]) / math.sqrt(2))
        rec = iterate_matrix(k, minus, 50)
        for state in rec.steps:
            assert trace_distance(state, minus) <= 1e-12

    def test_converged_at_recorded(self):
        k = exact_k(1.0)
        init = MeterState.from_bloch((0.0, 0.0, 1.0))
        rec = iterate_matrix(k, init, 3000)
        assert rec.converged_at is not None
        assert rec.converged_at < 3000


class TestEvolveState:
    def test_matches_stepwise_iteration(self):
        rng = np.random.default_rng(71)
        worst = 0.0
        for _ in range(40):
            phi = rng.uniform(0.1, math.pi - 0.1)
            gt = rng.uniform(0.01, 0.4)
            k = exact_k(float(phi), CouplingSpec.from_gt(float(gt)))
            init = random_pure(rng)
            for n in (0, 1, 3, 17, 80):
                a = evolve_state(k, init, n)
                b = iterate_matrix(k, init, n).final
                worst = max(worst, trace_distance(a, b))
        assert worst <= 1e-11

    def test_large_n_reaches_long_time_state(self):
        k = exact_k(1.0)
        init = MeterState.from_bloch((0.0, 0.0, 1.0))
        target = long_time_state(k, init)
        assert trace_distance(evolve_state(k, init, 10**6), target) <= 1e-12

    def test_first_order_path(self):
        k = first_order_k(0.9, 0.02)
        init = MeterState.from_bloch((0.2, -0.3, math.sqrt(1 - 0.04 - 0.09)))
        a = evolve_state(k, init, 37)
        b = iterate_matrix(k, init, 37).final
        assert trace_distance(a, b) <= 1e-12


class TestIterateAmplitudes:
    def test_n_zero_unchanged(self):
        k = first_order_k(0.9, 0.01)
        c0 = np.array([0.6, 0.8], dtype=complex)
        p = iterate_amplitudes(k, c0, 0)
        assert np.allclose(p, [0.36, 0.64], atol=1e-14)

    def test_real_weak_value_probabilities_frozen(self):
        k = first_order_k(0.9, 0.01, alpha=0.0)  # Im(O_w) = 0
        c0 = np.array([0.6, 0.8], dtype=complex)
        for n in (1, 10, 1000):
            assert np.allclose(iterate_amplitudes(k, c0, n), [0.36, 0.64], atol=1e-12)

    def test_two_level_balanced_frozen_value(self):
        # purely imaginary weak value O_w = i (theta=pi/4, phi=pi/4, alpha=pi/2)
        # with gt = 0.01 gives exact per-round weights (1 +/- 0.01)^2; after
        # n = 100 rounds the probability ratio is ((1.01)/(0.99))^200
        gt, n = 0.01, 100
        k = first_order_k(math.pi / 4, gt, alpha=math.pi / 2)
        assert k.weak_value == pytest.approx(1j, abs=1e-14)
        c0 = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2)
        p = iterate_amplitudes(k, c0, n)
        ratio = (1.01 / 0.99) ** (2 * n)
        expected_p1 = ratio / (1.0 + ratio)
        assert p[0] == pytest.approx(expected_p1, abs=1e-12)
        assert p.sum() == pytest.approx(1.0, abs=1e-14)

    def test_cross_check_against_matrix_iteration(self):
        gt, n = 0.01, 100
        k = first_order_k(math.pi / 4, gt, alpha=math.pi / 2)
        obs = k.meter_observable
        c0 = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2)
        p = iterate_amplitudes(k, c0, n)
        init = MeterState.pure(obs.spectrum.eigenvectors @ c0)
        rho_n = iterate_matrix(k, init, n).final.rho
        for j in range(2):
            v = obs.spectrum.eigenvectors[:, j]
            p_matrix = float(np.real(np.vdot(v, rho_n @ v)))
            assert abs(p[j] - p_matrix) <= 1e-8

    def test_rejects_exact_form(self):
        with pytest.raises(ValueError):
            iterate_amplitudes(exact_k(1.0), np.array([1.0, 0.0]), 5)

    def test_rejects_unnormalized(self):
        k = first_order_k(0.9, 0.01)
        with pytest.raises(ValueError):
            iterate_amplitudes(k, np.array([1.0, 1.0]), 5)


class TestBlochStep:
    def test_identity_at_zero_coupling(self):
        k = exact_k(0.8, CouplingSpec.from_gt(0.0))
        r = BlochVector(0.1, -0.4, 0.5)
        out = bloch_step(k, r)
        assert (out.rx, out.ry, out.rz) == pytest.approx((r.rx, r.ry, r.rz), abs=1e-15)

    def test_sigma_x_eigenstates_fixed(self):
        rng = np.random.default_rng(73)
        for _ in range(30):
            k = exact_k(float(rng.uniform(0.05, math.pi - 0.05)),
                        CouplingSpec.from_gt(float(rng.uniform(0.0, 0.8))))
            for rx in (1.0, -1.0):
                out = bloch_step(k, BlochVector(rx, 0.0, 0.0))
                assert (out.rx, out.ry, out.rz) == pytest.approx((rx, 0.0, 0.0), abs=1e-14)

    def test_matches_matrix_single_step(self):
        rng = np.random.default_rng(79)
        worst = 0.0
        for _ in range(100):
            k = exact_k(float(rng.uniform(0.05, math.pi - 0.05)),
                        CouplingSpec.from_gt(float(rng.uniform(0.0, 0.6))))
            r = rng.normal(size=3)
            r /= np.linalg.norm(r)
            rv = BlochVector(*[float(x) for x in r])
            ours = bloch_step(k, rv)
            ref = iterate_matrix(k, MeterState.from_bloch(rv), 1).final.bloch()
            worst = max(worst, abs(ours.rx - ref.rx), abs(ours.ry - ref.ry),
                        abs(ours.rz - ref.rz))
        assert worst <= 1e-12

    def test_convergence_from_near_pole(self):
        # phi=1: trajectory settles on the dominant eigenvector of K
        # (the +x pole under the unitary-consistent sign; the brute-force
        # bipartite simulator certifies the side in test_bipartite)
        k = exact_k(1.0)
        r = BlochVector(math.sqrt(0.99), 0.0, math.sqrt(0.001))
        for _ in range(600):
            r = bloch_step(k, r)
        top = k.spectrum.eigenvectors[:, 0]
        x_side = float(np.real(np.vdot(top, SIGMA_X @ top)))
        assert abs(r.rx - math.copysign(1.0, x_side)) <= 1e-8
        assert abs(r.ry) <= 1e-8 and abs(r.rz) <= 1e-8

    def test_purity_preserved_over_long_runs(self):
        k = exact_k(1.3)
        r = BlochVector(0.0, 0.0, 1.0)
        for _ in range(10_000):
            r = bloch_step(k, r)
        assert abs(r.norm - 1.0) <= 1e-8


class TestFixedPoints:
    def test_marginal_when_weak_value_real(self):
        k = first_order_k(0.9, 0.01, alpha=0.0)
        report = classify_fixed_points(k)
        assert all(fp.stability == MARGINAL_UNITARY for fp in report.fixed_points)

    def test_stable_is_plus_for_positive_imaginary_part(self):
        # Im(O_w) > 0 on (0, pi/2): stable fixed point is |+> (largest o_j)
        k = first_order_k(0.9, 0.01)
        assert k.weak_value.imag > 0
        report = classify_fixed_points(k)
        stable = report.stable()
        assert stable is not None
        assert stable.bloch.rx == pytest.approx(1.0, abs=1e-12)
        assert sum(fp.stability == UNSTABLE for fp in report.fixed_points) == 1

    def test_exact_qubit_one_stable_one_unstable(self):
        report = classify_fixed_points(exact_k(1.0))
        kinds = sorted(fp.stability for fp in report.fixed_points)
        assert kinds == [STABLE, UNSTABLE]
        # oracle-certified side: +x is stable at phi=1 (see test_bipartite)
        assert report.stable().bloch.rx == pytest.approx(1.0, abs=1e-12)

    def test_all_marginal_at_critical_angle(self):
        report = classify_fixed_points(exact_k(math.pi / 2))
        assert all(fp.stability == MARGINAL_UNITARY for fp in report.fixed_points)


class TestLongTimeState:
    def test_projector_onto_dominant_eigenvector(self):
        k = exact_k(1.0)
        init = MeterState.from_bloch((0.0, 0.0, 1.0))
        target = long_time_state(k, init)
        top = k.spectrum.eigenvectors[:, 0]
        assert trace_distance(target, MeterState.pure(top)) <= 1e-14

    def test_iteration_converges_to_it(self):
        k = exact_k(math.pi / 2 + 0.1)
        init = MeterState.from_bloch((math.sqrt(0.5), 0.0, math.sqrt(0.5)))
        target = long_time_state(k, init)
        tau = relaxation_time(k)
        n = math.ceil(50 * tau)
        final = iterate_matrix(k, init, n).final
        assert trace_distance(final, target) <= 1e-8

    def test_degenerate_spectrum_rejected(self):
        with pytest.raises(NoDominantEigenvalue):
            long_time_state(exact_k(math.pi / 2), MeterState.from_bloch((0, 0, 1)))

    def test_unstable_manifold_start_rejected(self):
        k = exact_k(1.0)
        unstable = k.spectrum.eigenvectors[:, 1]
        with pytest.raises(UnstableManifoldStart):
            long_time_state(k, MeterState.pure(unstable))


class TestRegimes:
    def test_unitary_at_half_pi(self):
        assert classify_regime(exact_k(math.pi / 2)) == REGIME_UNITARY

    def test_spiral_near_half_pi(self):
        assert classify_regime(exact_k(math.pi / 2 + 0.1)) == REGIME_NEAR_UNITARY_SPIRAL

    def test_stable_flow_sides(self):
        assert classify_regime(exact_k(1.0)) == REGIME_STABLE_FLOW_HIGH
        assert classify_regime(exact_k(2.4)) == REGIME_STABLE_FLOW_LOW

    def test_stable_pole_flips_across_critical_angle(self):
        report_low = classify_fixed_points(exact_k(1.0))
        report_high = classify_fixed_points(exact_k(math.pi / 2 + 0.1))
        assert report_low.stable().bloch.rx == pytest.approx(1.0, abs=1e-12)
        assert report_high.stable().bloch.rx == pytest.approx(-1.0, abs=1e-12)


class TestExpectation:
    def test_sigma_z_on_zero_state(self):
        assert expectation(SIGMA_Z, MeterState.from_bloch((0, 0, 1))) == pytest.approx(1.0)

    def test_sigma_x_on_maximally_mixed(self):
        assert expectation(SIGMA_X, MeterState.maximally_mixed(2)) == pytest.approx(0.0)

    def test_rejects_non_hermitian(self):
        with pytest.raises(NotHermitian):
            expectation(np.array([[0, 1], [0, 0]]), MeterState.maximally_mixed(2))

    def test_one_step_matches_bipartite_oracle(self):
        theta, alpha, gamma, phi = math.pi / 4, math.pi / 7, 0.001, 0.3
        k = kraus_exact_qubit(
            SystemPreparation(theta), PostSelection(phi=phi, alpha=alpha),
            CouplingSpec(gamma, 1.0),
        )
        init = MeterState.from_bloch((0.0, 0.0, 1.0))
        ours = expectation(SIGMA_X, iterate_matrix(k, init, 1).final)
        oracle = bipartite_run(theta, phi, alpha, gamma, init, 1).final
        assert abs(ours - expectation(SIGMA_X, oracle)) <= 1e-12


class TestRepresentationEquivalence:
    def test_three_way_equivalence_first_order(self):
        rng = np.random.default_rng(83)
        obs = MeterObservable.sigma_x()
        checked = 0
        while checked < 80:
            theta = float(rng.uniform(0.05, math.pi / 2 - 0.05))
            phi = float(rng.uniform(0.05, math.pi - 0.05))
            alpha = float(rng.uniform(0.0, 2 * math.pi))
            gt = float(rng.uniform(0.001, 0.05))
            prep = SystemPreparation(theta)
            post = PostSelection(phi=phi, alpha=alpha)
            if abs(overlap(prep, post)) < 0.05:
                continue
            k = kraus_first_order(
                overlap(prep, post), weak_value(prep, post, SIGMA_Z),
                CouplingSpec.from_gt(gt), obs,
            )
            c0 = rng.normal(size=2) + 1j * rng.normal(size=2)
            c0 /= np.linalg.norm(c0)
            init = MeterState.pure(obs.spectrum.eigenvectors @ c0)
            n = int(rng.integers(1, 60))

            rec = iterate_matrix(k, init, n)
            r = init.bloch()
            for _ in range(n):
                r = bloch_step(k, r)
            mb = rec.final.bloch()
            assert abs(r.rx - mb.rx) <= 1e-10
            assert abs(r.ry - mb.ry) <= 1e-10
            assert abs(r.rz - mb.rz) <= 1e-10

            probs = iterate_amplitudes(k, c0, n)
            for j in range(2):
                v = obs.spectrum.eigenvectors[:, j]
                p_matrix = float(np.real(np.vdot(v, rec.final.rho @ v)))
                assert abs(probs[j] - p_matrix) <= 1e-10
            checked += 1
