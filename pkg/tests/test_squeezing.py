"""Operator chain, truncated-space evolution, and the Gaussian model.

Evolution results are checked against analytic pair-production
statistics (mean occupation, joint and marginal distributions, extracted
single-mode distribution) rather than against the solver itself. The
pump-explicit three-mode model is validated through its 1/N convergence
onto the pump-replaced limit.
"""

import math

import numpy as np
import pytest

from gravlab import (
    CalibrationError,
    ConfigError,
    DomainError,
    FockSpace,
    HamiltonianParams,
    NumericalError,
    SqueezingModel,
    build_hamiltonians,
    build_operators,
    calibrate_model,
    coherent_model,
    evolve,
    mean_occupations,
    mode_transform,
    occupation_distribution,
    squeezed_vacuum_stats,
    squeezing_parameter,
    tomography_variance,
    vacuum_state,
)

# closed-form calibration from the (-5.4, +9.9) dB tomography extremes
FROZEN_R = 1.1302698853537816
FROZEN_SIGMA_DET = 16.61816667208982


def pair_distribution(r: float, n: np.ndarray) -> np.ndarray:
    """Per-mode occupation law of the optimally pair-correlated state:
    geometric in tanh^2(r)."""
    t2 = math.tanh(r) ** 2
    return (1.0 - t2) * t2**n


def extracted_distribution(r: float, n_max: int) -> np.ndarray:
    """Occupation law of the symmetric combination: even terms only,
    (2m)!/(4^m m!^2) tanh^{2m} r / cosh r."""
    p = np.zeros(n_max + 1)
    for m in range(0, n_max // 2 + 1):
        p[2 * m] = (
            math.factorial(2 * m)
            / (4.0**m * math.factorial(m) ** 2)
            * math.tanh(r) ** (2 * m)
            / math.cosh(r)
        )
    return p


class TestOperators:
    def test_canonical_commutator_below_cutoff(self):
        space = FockSpace(n_max=8)
        ops = build_operators(space)
        comm = ops.a_plus @ ops.a_plus.T - ops.a_plus.T @ ops.a_plus
        # exact identity except on states touching the top Fock level
        d = space.dim_single
        keep = np.array([i // d < d - 1 for i in range(space.dim)])
        assert np.allclose(comm[np.ix_(keep, keep)], np.eye(space.dim)[np.ix_(keep, keep)])

    def test_modes_commute(self):
        ops = build_operators(FockSpace(n_max=6))
        assert np.max(np.abs(ops.a_plus @ ops.a_minus - ops.a_minus @ ops.a_plus)) == 0.0

    def test_number_operator_spectrum(self):
        space = FockSpace(n_max=5)
        ops = build_operators(space)
        diag = np.diag(ops.n_plus)
        assert set(np.round(diag).astype(int)) == set(range(space.dim_single))

    def test_space_validation(self):
        with pytest.raises(ConfigError):
            FockSpace(n_max=3)
        with pytest.raises(ConfigError):
            FockSpace(n_max=200)


class TestHamiltonianChain:
    def test_pair_terms_cancel_number_terms_at_matched_zeeman(self):
        space = FockSpace(n_max=10)
        h = build_hamiltonians(space, HamiltonianParams(zeeman_q_rad_s=1.0, interaction_rad_s=1.0))
        assert np.max(np.abs(h.undepleted - h.two_mode)) == 0.0

    def test_mode_split_reassembles_exactly(self):
        # acceptance-level identity at n_max = 12
        space = FockSpace(n_max=12)
        h = build_hamiltonians(space, HamiltonianParams())
        assert np.max(np.abs(h.two_mode - (h.symmetric_mode - h.antisymmetric_mode))) < 1e-10

    def test_all_pieces_hermitian(self):
        h = build_hamiltonians(FockSpace(n_max=8), HamiltonianParams())
        for m in (h.two_mode, h.undepleted, h.symmetric_mode, h.antisymmetric_mode):
            assert np.max(np.abs(m - m.conj().T)) < 1e-12

    def test_full_model_requested_on_oversized_space(self):
        with pytest.raises(ConfigError):
            build_hamiltonians(FockSpace(n_max=30), HamiltonianParams(), include_full=True)


class TestEvolution:
    def test_mean_occupation_matches_pair_production_law(self):
        space = FockSpace(n_max=40)
        h = build_hamiltonians(space, HamiltonianParams())
        psi0 = vacuum_state(space)
        for r in (0.3, 0.7, 1.0):
            out = evolve(h.two_mode, psi0, r)  # interaction_rad_s = 1
            np_mean, nm_mean = mean_occupations(out, space)
            assert np_mean == pytest.approx(math.sinh(r) ** 2, abs=5e-9)
            assert nm_mean == pytest.approx(math.sinh(r) ** 2, abs=5e-9)

    def test_occupations_perfectly_correlated(self):
        space = FockSpace(n_max=30)
        h = build_hamiltonians(space, HamiltonianParams())
        out = evolve(h.two_mode, vacuum_state(space), 0.8)
        psi = out.reshape(space.dim_single, space.dim_single)
        prob = np.abs(psi) ** 2
        off_diag = prob - np.diag(np.diag(prob))
        assert np.max(off_diag) < 1e-16

    def test_marginal_is_geometric(self):
        space = FockSpace(n_max=40)
        h = build_hamiltonians(space, HamiltonianParams())
        out = evolve(h.two_mode, vacuum_state(space), 0.8)
        got = occupation_distribution(out, space, mode=0)
        want = pair_distribution(0.8, np.arange(space.dim_single))
        assert np.max(np.abs(got - want)) < 1e-10

    def test_nonunitary_generator_rejected(self):
        space = FockSpace(n_max=6)
        bad = 1j * np.eye(space.dim)  # anti-Hermitian H -> non-unitary U
        with pytest.raises(NumericalError):
            evolve(bad, vacuum_state(space), 1.0)

    def test_vacuum_state_is_normalized_empty(self):
        space = FockSpace(n_max=12)
        psi = vacuum_state(space)
        assert np.linalg.norm(psi) == 1.0
        assert mean_occupations(psi, space) == (0.0, 0.0)


class TestModeTransform:
    def test_extracted_mode_distribution(self):
        space = FockSpace(n_max=40)
        h = build_hamiltonians(space, HamiltonianParams())
        out = evolve(h.two_mode, vacuum_state(space), 0.8)
        rotated = mode_transform(out, space)
        got = occupation_distribution(rotated, space, mode=0)
        want = extracted_distribution(0.8, space.n_max)
        assert np.max(np.abs(got - want)) < 1e-8

    def test_odd_occupations_absent_in_extracted_mode(self):
        space = FockSpace(n_max=30)
        h = build_hamiltonians(space, HamiltonianParams())
        out = evolve(h.two_mode, vacuum_state(space), 0.6)
        rotated = mode_transform(out, space)
        dist = occupation_distribution(rotated, space, mode=0)
        # the only odd-term weight is beamsplitter leakage out of joint
        # shells with more than n_max total quanta (~1e-10 here)
        assert np.max(dist[1::2]) < 1e-9

    def test_quadrature_variances_of_split_state(self):
        # after the basis change the two factors are squeezed along
        # opposite quadratures: Var x_{-pi/4} = e^{-2r}/2 on the first
        space = FockSpace(n_max=40)
        h = build_hamiltonians(space, HamiltonianParams())
        r = 0.7
        rotated = mode_transform(evolve(h.two_mode, vacuum_state(space), r), space)
        d = space.dim_single
        a = np.diag(np.sqrt(np.arange(1.0, d)), 1)
        eye = np.eye(d)
        for theta, want in ((-math.pi / 4, 0.5 * math.exp(-2 * r)), (math.pi / 4, 0.5 * math.exp(2 * r))):
            x = (a * np.exp(-1j * theta) + a.conj().T * np.exp(1j * theta)) / math.sqrt(2)
            x_full = np.kron(x, eye)
            mean = np.real(np.conj(rotated) @ (x_full @ rotated))
            second = np.real(np.conj(rotated) @ (x_full @ x_full @ rotated))
            assert second - mean**2 == pytest.approx(want, rel=1e-6)

    def test_transform_is_norm_preserving(self):
        space = FockSpace(n_max=12)
        rng = np.random.default_rng(5)
        psi = rng.standard_normal(space.dim) + 1j * rng.standard_normal(space.dim)
        psi /= np.linalg.norm(psi)
        out = mode_transform(psi, space)
        assert np.linalg.norm(out) == pytest.approx(1.0, abs=1e-10)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DomainError):
            mode_transform(np.zeros(7), FockSpace(n_max=6))


class TestFullThreeModeModel:
    @staticmethod
    def _mean_pairs(n_max: int, pump: int, t: float) -> float:
        space = FockSpace(n_max=n_max)
        params = HamiltonianParams(pump_atoms=pump)
        h = build_hamiltonians(space, params, include_full=True)
        d = n_max + 1
        psi = np.zeros(d**3, dtype=complex)
        psi[pump * d * d] = 1.0  # all atoms in the pump mode
        out = evolve(h.full, psi, t)
        a = np.diag(np.sqrt(np.arange(1.0, d)), 1)
        eye = np.eye(d)
        n_plus = np.kron(np.kron(eye, a.conj().T @ a), eye)
        return float(np.real(np.conj(out) @ (n_plus @ out)))

    def test_converges_onto_pump_replaced_limit(self):
        t = 0.05
        exact = math.sinh(t) ** 2
        err5 = self._mean_pairs(10, 5, t) - exact
        err10 = self._mean_pairs(10, 10, t) - exact
        # leading correction is O(1/N): halving 1/N halves the error ...
        assert abs(err10) < 0.6 * abs(err5)
        # ... and extrapolating it away lands on the analytic value
        extrapolated = 2 * self._mean_pairs(10, 10, t) - self._mean_pairs(10, 5, t)
        assert extrapolated == pytest.approx(exact, rel=5e-3)


class TestGaussianModel:
    def test_calibration_closed_form(self):
        model = calibrate_model(-5.4, 9.9, 6000.0)
        assert model.strength == pytest.approx(FROZEN_R, rel=1e-14)
        assert model.detection_noise_atoms == pytest.approx(FROZEN_SIGMA_DET, rel=1e-12)

    def test_calibration_round_trip_is_exact(self):
        model = calibrate_model(-5.4, 9.9, 6000.0)
        at_min = tomography_variance(model, model.optimal_phase_rad)
        at_max = tomography_variance(model, model.optimal_phase_rad + math.pi / 2)
        assert squeezing_parameter(at_min, model.atom_number)[1] == pytest.approx(-5.4, abs=1e-11)
        assert squeezing_parameter(at_max, model.atom_number)[1] == pytest.approx(9.9, abs=1e-11)

    def test_infeasible_targets_rejected(self):
        with pytest.raises(CalibrationError):
            calibrate_model(-3.0, 2.0, 6000.0)

    def test_reversed_targets_rejected(self):
        with pytest.raises(DomainError):
            calibrate_model(2.0, -2.0, 6000.0)

    def test_variance_period_pi(self):
        model = calibrate_model(-5.4, 9.9, 6000.0)
        for phi in np.linspace(0, 2 * math.pi, 17):
            assert tomography_variance(model, float(phi)) == pytest.approx(
                tomography_variance(model, float(phi) + math.pi), rel=1e-12
            )

    def test_minimum_exactly_at_optimal_phase(self):
        model = calibrate_model(-5.4, 9.9, 6000.0)
        v_opt = tomography_variance(model, model.optimal_phase_rad)
        for dphi in (-0.3, -0.05, 0.05, 0.3):
            assert tomography_variance(model, model.optimal_phase_rad + dphi) > v_opt

    def test_uncertainty_product_bound(self):
        # min * max = (N/4)^2 exactly for a pure state, larger with
        # detection noise on top
        pure = SqueezingModel(atom_number=6000.0, strength=0.9)
        lo = tomography_variance(pure, pure.optimal_phase_rad)
        hi = tomography_variance(pure, pure.optimal_phase_rad + math.pi / 2)
        assert lo * hi == pytest.approx((6000.0 / 4.0) ** 2, rel=1e-12)
        noisy = calibrate_model(-5.4, 9.9, 6000.0)
        lo_n = tomography_variance(noisy, noisy.optimal_phase_rad)
        hi_n = tomography_variance(noisy, noisy.optimal_phase_rad + math.pi / 2)
        assert lo_n * hi_n > (6000.0 / 4.0) ** 2

    def test_coherent_model_is_flat_at_projection_limit(self):
        model = coherent_model(6000.0)
        for phi in np.linspace(0, 2 * math.pi, 13):
            linear, db = squeezing_parameter(tomography_variance(model, float(phi)), 6000.0)
            assert linear == 1.0
            assert db == 0.0

    def test_squeezing_parameter_guards(self):
        with pytest.raises(DomainError):
            squeezing_parameter(0.0, 6000.0)
        with pytest.raises(DomainError):
            squeezing_parameter(1.0, 0.0)

    def test_model_validation(self):
        with pytest.raises(ConfigError):
            SqueezingModel(atom_number=0.0)
        with pytest.raises(ConfigError):
            SqueezingModel(strength=-0.1)
        with pytest.raises(ConfigError):
            SqueezingModel(detection_noise_atoms=-1.0)


class TestAnalyticStats:
    def test_mean_and_quadratures(self):
        stats = squeezed_vacuum_stats(0.8)
        assert stats["mean_atoms_per_mode"] == pytest.approx(math.sinh(0.8) ** 2, rel=1e-15)
        assert stats["mean_total"] == pytest.approx(2 * math.sinh(0.8) ** 2, rel=1e-15)
        product = stats["quadrature_var_minus"] * stats["quadrature_var_plus"]
        assert product == pytest.approx(0.25, rel=1e-15)

    def test_negative_strength_rejected(self):
        with pytest.raises(DomainError):
            squeezed_vacuum_stats(-0.1)
