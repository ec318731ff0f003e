import numpy as np
import pytest

from conftest import SMALL_GRID
from utils.bridge_dynamics import (
    ENERGY_TERMS,
    NONNEGATIVE_TERMS,
    BridgeParams,
    EnergyBreakdown,
    ModalState,
    assemble_system,
    build_system,
    energy,
    energy_bounds,
    energy_table,
    hanger_arguments,
    linear_counterpart,
    modal_rhs,
    modal_rhs_forced_linear,
    nonlinear_forces,
    nonlinear_loads_grid,
    nonlinear_potential,
    project_initial_data,
    rhs_for,
    single_beam_rhs,
    state_columns,
    theta_energy_share,
)
from utils.errors import ParameterError


def random_state(rng, n, p_scale=1e-2, deck_scale=0.1):
    decay = 1.0 / np.arange(1, n + 1) ** 2

    def block(scale):
        return scale * rng.normal(size=n) * decay

    return ModalState(0.0, block(p_scale), block(p_scale), block(deck_scale), block(deck_scale),
                      block(1.0), block(1.0), block(1.0), block(1.0))


class TestBridgeParams:

    @pytest.mark.parametrize("field, value", [("M", 0.0), ("EI", -1.0), ("kappa0", float("nan"))])
    def test_rejects_nonpositive_constants(self, field, value):
        with pytest.raises(ParameterError, match=f"bridge.{field}"):
            BridgeParams(**{field: value})

    def test_rejects_bad_mode_count_and_flag(self):
        with pytest.raises(ParameterError, match="bridge.n_modes"):
            BridgeParams(n_modes=0)
        with pytest.raises(ParameterError, match="bridge.mode_flag"):
            BridgeParams(mode_flag="three_cables")

    @pytest.mark.parametrize("flag, expected", [
        ("full_bridge", 10.0), ("linear_decoupled", 10.0), ("single_beam", 20.0),
    ])
    def test_load_mass_per_cable(self, flag, expected):
        assert BridgeParams(mode_flag=flag).load_mass == expected


def test_modal_state_checks_block_shapes():
    with pytest.raises(ParameterError, match="p2"):
        ModalState(0.0, np.zeros(2), np.zeros(3), np.zeros(2), np.zeros(2),
                   np.zeros(2), np.zeros(2), np.zeros(2), np.zeros(2))


class TestBuildSystem:

    def test_rejects_basis_of_another_size(self, small_system):
        with pytest.raises(ParameterError):
            build_system(BridgeParams(n_modes=3), small_system.profile, small_system.basis)

    def test_rejects_profile_with_another_load(self, small_system):
        params = BridgeParams(n_modes=4, mode_flag="single_beam")
        with pytest.raises(ParameterError, match="load_mass"):
            build_system(params, small_system.profile, small_system.basis)

    def test_printed_exponents_lower_the_stiffness_powers(self):
        system = assemble_system(BridgeParams(n_modes=4, printed_exponents=True), **SMALL_GRID)
        k = np.arange(1, 5)
        np.testing.assert_allclose(system.y_stiffness, 100.0 * k ** 2)
        np.testing.assert_allclose(system.theta_stiffness, 50.0 * k)

    def test_linear_counterpart_switches_off_couplings(self, small_system, rng):
        linear = linear_counterpart(small_system)
        assert linear.hanger_model == "off" and not linear.nonlocal_on
        forces = nonlinear_forces(random_state(rng, 4), linear)
        assert np.all(forces.as_vector() == 0.0)


class TestForces:

    def test_forces_are_minus_gradient_of_potential(self, default_system, rng):
        h = 1e-6
        for _ in range(20):
            state = random_state(rng, default_system.n_modes)
            q, v = state.positions(), state.velocities()
            gradient = np.empty(q.size)
            for i in range(q.size):
                step = np.zeros(q.size)
                step[i] = h
                upper = nonlinear_potential(ModalState.from_vectors(0.0, q + step, v), default_system)
                lower = nonlinear_potential(ModalState.from_vectors(0.0, q - step, v), default_system)
                gradient[i] = (upper - lower) / (2.0 * h)
            forces = nonlinear_forces(state, default_system).as_vector()
            assert np.linalg.norm(forces + gradient) <= 1e-5 * np.linalg.norm(forces)

    def test_single_beam_is_the_symmetric_full_bridge(self, small_system, rng):
        beam = assemble_system(BridgeParams(M=10.0, EI=50.0, n_modes=4, mode_flag="single_beam"),
                               **SMALL_GRID)
        state = random_state(rng, 4)
        symmetric = ModalState(0.0, state.p1, state.p1, state.y, np.zeros(4),
                               state.dp1, state.dp1, state.dy, np.zeros(4))
        full = modal_rhs(symmetric, small_system)
        single = single_beam_rhs(symmetric, beam)
        np.testing.assert_allclose(single.p1, full.p1, rtol=1e-12, atol=1e-12 * np.max(np.abs(full.p1)))
        np.testing.assert_allclose(single.y, full.y, rtol=1e-12, atol=1e-12 * np.max(np.abs(full.y)))
        np.testing.assert_array_equal(single.theta, 0.0)

    def test_linearized_hangers_make_the_rhs_linear(self, rng):
        system = assemble_system(BridgeParams(n_modes=4), hanger_model="linearized", **SMALL_GRID)
        assert system.hanger_model == "linearized"
        a, b = random_state(rng, 4), random_state(rng, 4)
        alpha, beta = 0.7, -1.3
        combined = ModalState.from_vectors(
            0.0, alpha * a.positions() + beta * b.positions(),
            alpha * a.velocities() + beta * b.velocities(),
        )
        expected = (alpha * modal_rhs(a, system).as_vector()
                    + beta * modal_rhs(b, system).as_vector())
        actual = modal_rhs(combined, system).as_vector()
        np.testing.assert_allclose(actual, expected, rtol=0, atol=1e-12 * np.max(np.abs(expected)))

    def test_deep_slack_beam_falls_under_gravity(self):
        beam = assemble_system(BridgeParams(n_modes=4, mode_flag="single_beam"), **SMALL_GRID)
        params = beam.params
        y = np.array([-1000.0, 0.0, 0.0, 0.0])
        zero = np.zeros(4)
        state = ModalState(0.0, zero, zero, y, zero, zero, zero, zero, zero)
        (d,) = hanger_arguments(state, beam)
        assert np.all(d < beam.law.slack_threshold)

        acc = single_beam_rhs(state, beam)
        k = beam.basis.wavenumbers
        weight = params.M * params.g
        gravity = weight * np.sqrt(2.0 / np.pi) * (1.0 - (-1.0) ** k) / k
        np.testing.assert_allclose(params.M * acc.y + params.EI * k ** 4 * y, gravity,
                                   rtol=0, atol=1e-8 * weight)
        np.testing.assert_allclose(params.m * acc.p1, -weight * beam.cable_mode_integrals,
                                   rtol=1e-12, atol=1e-12 * weight)

    def test_rhs_matches_mode_flag(self, small_system, oscillator_system):
        beam = assemble_system(BridgeParams(n_modes=4, mode_flag="single_beam"), **SMALL_GRID)
        state = ModalState.zeros(4)
        with pytest.raises(ParameterError):
            modal_rhs(state, beam)
        with pytest.raises(ParameterError):
            single_beam_rhs(state, small_system)
        with pytest.raises(ParameterError):
            modal_rhs_forced_linear(state, small_system, lambda t: None)
        assert np.all(rhs_for(beam)(state).as_vector() == 0.0)
        assert np.all(rhs_for(oscillator_system)(ModalState.zeros(1)).as_vector() == 0.0)

    def test_equilibrium_is_at_rest(self, small_system):
        state = ModalState.zeros(4)
        assert np.all(modal_rhs(state, small_system).as_vector() == 0.0)
        breakdown = energy(state, small_system)
        assert breakdown.total_44 == 0.0
        assert breakdown.total_corrected == 0.0

    def test_grid_loads_project_onto_modal_forces(self, small_system, rng):
        state = random_state(rng, 4)
        g1, _, g3, g4 = nonlinear_loads_grid(state, small_system)
        forces = nonlinear_forces(state, small_system)
        np.testing.assert_allclose(small_system.sine_projector @ g3, forces.y, rtol=1e-12, atol=1e-12)
        np.testing.assert_allclose(small_system.sine_projector @ g4, forces.theta, rtol=1e-12, atol=1e-12)
        scale = np.max(np.abs(forces.p1))
        np.testing.assert_allclose(small_system.cable_projector @ g1, forces.p1, atol=1e-3 * scale)

    def test_forced_linear_system_projects_the_forcing(self, oscillator_system):
        size = oscillator_system.basis.grid.size
        zero = np.zeros(size)
        forcing = (zero, zero, oscillator_system.basis.e[0].copy(), zero)
        acc = modal_rhs_forced_linear(ModalState.zeros(1), oscillator_system, lambda t: forcing)
        assert acc.y[0] == pytest.approx(1.0 / oscillator_system.params.M, rel=1e-10)
        assert acc.p1[0] == 0.0


class TestEnergy:

    def test_nonnegative_terms(self, default_system, rng):
        for _ in range(5):
            breakdown = energy(random_state(rng, default_system.n_modes), default_system)
            for name in NONNEGATIVE_TERMS:
                assert getattr(breakdown, name) >= 0.0, name

    def test_unit_deck_velocity_carries_half_the_mass(self, small_system):
        zero = np.zeros(4)
        dy = np.array([1.0, 0.0, 0.0, 0.0])
        breakdown = energy(ModalState(0.0, zero, zero, zero, zero, zero, zero, dy, zero), small_system)
        M = small_system.params.M
        assert breakdown.kinetic_deck_translation == pytest.approx(0.5 * M, rel=1e-12)
        assert breakdown.total_44 == pytest.approx(0.5 * M, rel=1e-12)
        assert breakdown.total_corrected == pytest.approx(0.5 * M, rel=1e-12)

    def test_linear_cable_terms_cancel_against_the_weight(self, default_system):
        n = default_system.n_modes
        p1 = np.zeros(n)
        p2 = np.zeros(n)
        p1[0], p1[2] = 1e-2, 3e-3
        p2[0], p2[4] = -4e-3, 2e-3
        zero = np.zeros(n)
        breakdown = energy(ModalState(0.0, p1, p2, zero, zero, zero, zero, zero, zero), default_system)
        correction = breakdown.total_44 - breakdown.total_corrected
        linear = breakdown.cable_linear + breakdown.cable_gravity
        assert linear == pytest.approx(correction, rel=1e-4)

    def test_theta_energy_share(self):
        values = {name: 0.0 for name in ENERGY_TERMS}
        values.update(kinetic_deck_torsion=1.0, torsional_stiffness=1.0, bending=2.0)
        breakdown = EnergyBreakdown(**values, total_44=4.0, total_corrected=4.0)
        assert theta_energy_share(breakdown) == pytest.approx(0.5)
        rest = EnergyBreakdown(**{name: 0.0 for name in ENERGY_TERMS}, total_44=0.0, total_corrected=0.0)
        assert theta_energy_share(rest) == 0.0

    def test_energy_bounds_relative_to_initial_total(self):
        values = {name: 0.0 for name in ENERGY_TERMS}
        first = EnergyBreakdown(**dict(values, bending=2.0), total_44=2.0, total_corrected=2.0)
        second = EnergyBreakdown(**dict(values, bending=1.0, kinetic_cables=1.0),
                                 total_44=2.0, total_corrected=2.0)
        bounds = energy_bounds([first, second])
        assert bounds["bending"] == 1.0
        assert bounds["kinetic_cables"] == 0.5
        assert energy_bounds([]) == {}

    def test_energy_table_columns(self, small_system):
        table = energy_table([0.0], [energy(ModalState.zeros(4), small_system)])
        assert list(table.columns[:3]) == ["t", "total_44", "total_corrected"]
        assert list(table.columns[3:]) == ENERGY_TERMS


def test_state_columns():
    columns = state_columns(2)
    assert columns[:5] == ["t", "p1_1", "p1_2", "p2_1", "p2_2"]
    assert columns[-2:] == ["dth_1", "dth_2"]
    assert len(columns) == 1 + 2 * 4 * 2


def test_initial_data_projection_picks_out_a_mode(small_system):
    basis = small_system.basis
    zero = np.zeros(basis.grid.size)
    state = project_initial_data(basis.e[0], zero, basis.u[1], zero,
                                 zero, zero, zero, zero, basis)
    np.testing.assert_allclose(state.y, [1.0, 0.0, 0.0, 0.0], atol=1e-10)
    np.testing.assert_allclose(state.p1, [0.0, 1.0, 0.0, 0.0], atol=1e-8)
    np.testing.assert_array_equal(state.dtheta, 0.0)
