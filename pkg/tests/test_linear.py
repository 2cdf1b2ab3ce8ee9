"""Linear evolution: grid semigroup, continuum radial path, heat bounds."""

import numpy as np
import pytest
import scipy.integrate as si

from mmplab.analysis import fit_decay_exponent
from mmplab.decay_character import SpectralProfile
from mmplab.fields import Grid, PhysParams, StateField, l2_norm_sq
from mmplab.linear import (evolve_linear_grid, heat_bound_check,
                           make_radial_state, radial_linear_decay,
                           realize_profile_on_grid, sphere_rule_26)
from mmplab.symbol import assemble_symbol, semigroup_apply

from conftest import random_state


class TestGridEvolution:
    def test_identity_at_zero(self, grid16, params, rng):
        state = random_state(grid16, rng)
        out = evolve_linear_grid(state, params, 0.0)
        for a, b in zip(out.components(), state.components()):
            assert np.abs(a - b).max() < 1e-12

    def test_magnetic_block_pure_heat(self, grid16, params, rng):
        state = random_state(grid16, rng)
        zero = np.zeros_like(state.bhat)
        b_only = StateField(grid16, zero, zero.copy(), state.bhat)
        t = 0.4
        out = evolve_linear_grid(b_only, params, t)
        factor = np.exp(-params.nu * grid16.xi_sq * t)
        assert np.abs(out.bhat - factor[None] * state.bhat).max() < 1e-12
        assert np.abs(out.uhat).max() < 1e-14
        assert np.abs(out.what).max() < 1e-14

    def test_navier_stokes_reduction_heat_flow(self, grid16, rng):
        # chi = 0, w0 = b0 = 0: u follows plain heat flow with viscosity mu
        params = PhysParams(mu=0.7, gamma=1.0, chi=0.0, nu=1.0)
        state = random_state(grid16, rng)
        zero = np.zeros_like(state.uhat)
        u_only = StateField(grid16, state.uhat, zero, zero.copy())
        t = 0.8
        out = evolve_linear_grid(u_only, params, t)
        factor = np.exp(-params.mu * grid16.xi_sq * t)
        assert np.abs(out.uhat - factor[None] * state.uhat).max() < 1e-12

    def test_semigroup_composition(self, grid16, params, rng):
        state = random_state(grid16, rng)
        one = evolve_linear_grid(state, params, 0.9)
        two = evolve_linear_grid(evolve_linear_grid(state, params, 0.4),
                                 params, 0.5)
        for a, b in zip(one.components(), two.components()):
            assert np.abs(a - b).max() < 1e-10

    def test_norm_nonincreasing(self, grid16, params, rng):
        state = random_state(grid16, rng)
        norms = [l2_norm_sq(evolve_linear_grid(state, params, t))
                 for t in (0.0, 0.1, 0.5, 2.0)]
        assert np.all(np.diff(norms) <= 0)

    def test_matches_per_mode_symbol(self, grid8, params, rng):
        state = random_state(grid8, rng)
        t = 0.3
        out = evolve_linear_grid(state, params, t)
        for idx in ((1, 2, 3), (0, 0, 1), (2, 7, 5)):
            xi = np.array([grid8.xi_odd[a][idx] for a in range(3)])
            sl = (slice(None),) + idx
            v = np.concatenate([state.uhat[sl], state.what[sl], state.bhat[sl]])
            ref = semigroup_apply(assemble_symbol(xi, params), t, v)
            got = np.concatenate([out.uhat[sl], out.what[sl], out.bhat[sl]])
            assert np.abs(ref - got).max() < 1e-11

    def test_reality_preserved(self, grid16, params, rng):
        state = random_state(grid16, rng)
        out = evolve_linear_grid(state, params, 0.7)
        assert out.conjugate_symmetry_error() < 1e-12

    def test_negative_time_rejected(self, grid8, params):
        with pytest.raises(ValueError):
            evolve_linear_grid(StateField.zero(grid8), params, -1.0)


class TestSphereRule:
    def test_weights(self):
        points, weights = sphere_rule_26()
        assert points.shape == (26, 3)
        assert weights.sum() == pytest.approx(1.0, abs=1e-14)
        assert np.abs(np.linalg.norm(points, axis=1) - 1.0).max() < 1e-14

    def test_second_moment_exact(self):
        points, weights = sphere_rule_26()
        moment = np.einsum("d,di,dj->ij", weights, points, points)
        assert np.abs(moment - np.eye(3) / 3.0).max() < 1e-14


class TestRadialState:
    def test_mass_consistency(self, params):
        prof = SpectralProfile.power_law(0.0)
        state = make_radial_state(prof, params)
        exact, _ = si.quad(prof.radial_density, 0, 1, epsrel=1e-12, epsabs=0)
        assert abs(state.total_mass() - exact) / exact < 1e-6

    def test_infrared_tail_needs_smaller_rho_min(self, params):
        # r = -1 leaves rho_min of relative mass below the cutoff radius
        prof = SpectralProfile.power_law(-1.0)
        state = make_radial_state(prof, params, rho_min=1e-7)
        exact, _ = si.quad(prof.radial_density, 0, 1, epsrel=1e-12, epsabs=0)
        assert abs(state.total_mass() - exact) / exact < 1e-6

    def test_direction_contributions_identical(self, params):
        # rotational equivariance: every direction contributes equally
        prof = SpectralProfile.power_law(0.0)
        state = make_radial_state(prof, params)
        c = state.coeffs_at(0.8)
        dens = (np.abs(c) ** 2).sum(axis=2)
        radial = (dens * state.radial_weights[:, None] * state.radii[:, None] ** 2)
        per_direction = radial.sum(axis=0)
        spread = per_direction.max() - per_direction.min()
        assert spread < 1e-12 * per_direction.max()

    def test_norms_at_zero_match_initial(self, params):
        prof = SpectralProfile.power_law(0.0)
        state = make_radial_state(prof, params)
        row = state.norms_at(0.0)
        assert row["l2_z_sq"] == pytest.approx(state.total_mass(), rel=1e-12)


class TestRadialDecay:
    def test_heat_block_closed_form(self, params):
        prof = SpectralProfile.power_law(0.0)
        state = make_radial_state(prof, params, component_weights=(0, 0, 1))
        for t in (0.5, 3.0, 20.0):
            measured = state.norms_at(t)["l2_b_sq"]
            exact, _ = si.quad(
                lambda rho: np.exp(-2 * params.nu * t * rho ** 2)
                * 4 * np.pi * rho ** 2, 0, 1, epsrel=1e-12)
            assert abs(measured - exact) / exact < 1e-6

    def test_sharp_rate_for_flat_datum(self, params):
        times = np.geomspace(1e2, 1e4, 20)
        series = radial_linear_decay(SpectralProfile.power_law(0.0),
                                     times, params)
        exponent, _ = fit_decay_exponent(series["l2_z_sq"], (1e2, 1e4))
        assert abs(exponent + 1.5) < 0.05

    def test_enhanced_micro_rotation_rate(self, params):
        times = np.geomspace(1e2, 1e4, 20)
        series = radial_linear_decay(SpectralProfile.power_law(0.0),
                                     times, params)
        exponent, _ = fit_decay_exponent(series["l2_w_sq"], (1e2, 1e4))
        assert exponent <= -2.5 + 0.15

    def test_node_doubling_convergence_gate(self, params):
        times = np.geomspace(1e2, 1e3, 12)
        radial_linear_decay(SpectralProfile.power_law(0.0), times, params,
                            check_convergence=True)

    def test_time_monotonicity_validation(self, params):
        with pytest.raises(ValueError):
            radial_linear_decay(SpectralProfile.power_law(0.0),
                                [1.0, 1.0, 2.0], params)


class TestGridVersusRadial:
    def test_consistency_within_truncation_budget(self, params):
        grid = Grid(32, 32 * np.pi)
        prof = SpectralProfile.power_law(0.0, cutoff_radius=0.2, cutoff="gauss")
        state = realize_profile_on_grid(grid, prof)
        assert state.conjugate_symmetry_error() < 1e-13
        assert state.divergence_error() < 1e-13
        radial = make_radial_state(prof, params, rho_min=1e-4, rho_max=3.0)
        for t in (0.0, 1.0, 5.0, 10.0):
            g = l2_norm_sq(evolve_linear_grid(state, params, t))
            r = radial.norms_at(t)["l2_z_sq"]
            assert abs(g - r) / r < 0.03


class TestHeatBound:
    def test_l2_contraction(self):
        prof = SpectralProfile.power_law(0.0, cutoff_radius=1.0, cutoff="gauss")
        rep = heat_bound_check(prof, np.geomspace(1e-3, 1e2, 12))
        case = rep["cases"]["l2_m0"]
        assert case["contraction"]
        assert case["K"] <= 1.0 + 1e-12

    def test_ratio_approaches_one_at_small_time(self):
        prof = SpectralProfile.power_law(0.0, cutoff_radius=1.0, cutoff="gauss")
        rep = heat_bound_check(prof, np.array([1e-6]))
        assert rep["cases"]["l2_m0"]["ratios"][0] == pytest.approx(1.0, abs=1e-4)

    def test_gradient_case_matches_gaussian_closed_form(self):
        # intensity e^{-rho^2}: ||grad e^{tD} f||_2^2 has a Gamma-integral
        # closed form; the reported K must match its supremum over samples
        prof = SpectralProfile.power_law(0.0, cutoff_radius=1.0, cutoff="gauss")
        times = np.geomspace(1e-2, 1e2, 24)
        rep = heat_bound_check(prof, times)
        case = rep["cases"]["l2_m1"]

        def norm_sq_exact(t, m):
            a = 2.0 * t + 1.0
            from scipy.special import gamma
            return 4 * np.pi * 0.5 * gamma(m + 1.5) / a ** (m + 1.5)

        f2 = norm_sq_exact(0.0, 0)
        expected = np.array([np.sqrt(norm_sq_exact(t, 1) / f2) * np.sqrt(t)
                             for t in times])
        assert case["K"] == pytest.approx(expected.max(), rel=1e-6)
        assert np.isfinite(case["K"])

    def test_l1_proxy_case_bounded(self):
        prof = SpectralProfile.power_law(0.0, cutoff_radius=1.0, cutoff="gauss")
        rep = heat_bound_check(prof, np.geomspace(1e-1, 1e3, 16))
        assert np.isfinite(rep["cases"]["l1proxy_m0"]["K"])
