import math

import numpy as np
import pytest

from utils.bridge_dynamics import (
    BridgeParams,
    ModalState,
    assemble_system,
    modal_rhs_forced_linear,
    rhs_for,
)
from utils.errors import BlowUpError, HorizonTooLargeError, ParameterError
from utils.scenarios import scenario_state
from utils.time_integration import (
    IntegratorConfig,
    PicardConfig,
    SampledTrajectory,
    audit_total_44,
    contraction_ratio,
    energy_drift,
    frozen_trajectory,
    galerkin_cauchy_check,
    horizon_ladder,
    integrate_steps,
    picard_map,
    picard_solve,
    run,
    step,
    zt_distance,
)


def deck_oscillation(y0=0.1, dy0=0.0):
    one = np.array([y0])
    zero = np.zeros(1)
    return ModalState(0.0, zero, zero, one, zero, zero, zero, np.array([dy0]), zero)


def deck_energy(trajectory, system):
    """1/2 M dy^2 + 1/2 EI y^2 for the single deck mode k = 1."""
    params = system.params
    y = trajectory.positions[:, 2]
    dy = trajectory.velocities[:, 2]
    return 0.5 * params.M * dy ** 2 + 0.5 * params.EI * y ** 2


class TestConfigs:

    @pytest.mark.parametrize("kwargs", [
        {"method": "euler"}, {"dt": 0.0}, {"t_end": -1.0}, {"snapshot_every": 0},
        {"energy_audit_every": 1.5},
    ])
    def test_integrator_config_validation(self, kwargs):
        with pytest.raises(ParameterError):
            IntegratorConfig(**kwargs)

    @pytest.mark.parametrize("kwargs", [
        {"horizon": 0.0}, {"max_iterations": 0}, {"patience": 0}, {"method": "leapfrog"},
    ])
    def test_picard_config_validation(self, kwargs):
        with pytest.raises(ParameterError):
            PicardConfig(**kwargs)

    def test_step_counts(self):
        assert IntegratorConfig(dt=1e-3, t_end=10.0).n_steps == 10000
        assert PicardConfig(horizon=0.02, inner_dt=1e-3).n_steps == 20


class TestSteppers:

    @pytest.mark.parametrize("method", ["verlet", "rk4"])
    def test_equilibrium_stays_at_rest(self, small_system, method):
        trajectory = integrate_steps(ModalState.zeros(4), rhs_for(small_system), method, 1e-3, 10000)
        assert np.max(np.abs(trajectory.positions)) <= 1e-10
        assert np.max(np.abs(trajectory.velocities)) <= 1e-10

    def test_verlet_energy_stays_bounded_without_drift(self, oscillator_system):
        trajectory = integrate_steps(deck_oscillation(), rhs_for(oscillator_system), "verlet", 0.05, 100000)
        values = deck_energy(trajectory, oscillator_system)
        e0 = values[0]
        assert np.max(np.abs(values - e0)) / e0 <= 5e-3
        tenth = values.size // 10
        assert abs(values[:tenth].mean() - values[-tenth:].mean()) / e0 <= 1e-4

    def test_rk4_dissipates_energy(self, oscillator_system):
        trajectory = integrate_steps(deck_oscillation(), rhs_for(oscillator_system), "rk4", 0.05, 2000)
        assert np.all(np.diff(deck_energy(trajectory, oscillator_system)) < 0)

    def test_verlet_is_second_order(self):
        system = assemble_system(BridgeParams(n_modes=8))
        initial = scenario_state("longitudinal", system)
        finals = [
            integrate_steps(initial, rhs_for(system), "verlet", dt, int(round(0.5 / dt))).positions[-1]
            for dt in (2e-3, 1e-3, 5e-4)
        ]
        ratio = np.max(np.abs(finals[0] - finals[1])) / np.max(np.abs(finals[1] - finals[2]))
        assert 3.0 <= ratio <= 5.0

    def test_verlet_is_time_reversible(self, small_system):
        rhs = rhs_for(small_system)
        initial = scenario_state("slackening", small_system)
        forward = integrate_steps(initial, rhs, "verlet", 1e-3, 200)
        turned = forward.state_at(-1)
        back = ModalState.from_vectors(0.0, turned.positions(), -turned.velocities())
        returned = integrate_steps(back, rhs, "verlet", 1e-3, 200)
        np.testing.assert_allclose(returned.positions[-1], initial.positions(), atol=1e-9)
        np.testing.assert_allclose(-returned.velocities[-1], initial.velocities(), atol=1e-9)

    @pytest.mark.parametrize("method", ["verlet", "rk4"])
    def test_single_step_matches_trajectory(self, small_system, method):
        initial = scenario_state("slackening", small_system)
        rhs = rhs_for(small_system)
        one = step(initial, rhs, IntegratorConfig(method=method, dt=1e-3))
        trajectory = integrate_steps(initial, rhs, method, 1e-3, 1)
        assert one.t == pytest.approx(1e-3)
        np.testing.assert_allclose(one.positions(), trajectory.positions[1], rtol=1e-14, atol=0)
        np.testing.assert_allclose(one.velocities(), trajectory.velocities[1], rtol=1e-14, atol=0)

    @pytest.mark.filterwarnings("ignore::RuntimeWarning")
    def test_blow_up_keeps_the_partial_trajectory(self, oscillator_system):
        one = np.ones(1)
        zero = np.zeros(1)
        initial = ModalState(0.0, one, zero, zero, zero, zero, zero, zero, zero)
        with pytest.raises(BlowUpError) as info:
            integrate_steps(initial, rhs_for(oscillator_system), "rk4", 1.0, 1000)
        partial = info.value.partial
        assert isinstance(partial, SampledTrajectory)
        assert partial.times.size >= 1
        assert np.all(np.isfinite(partial.positions))
        assert info.value.time == pytest.approx(partial.times[-1] + 1.0)


class TestRun:

    def test_recording_strides_include_the_last_step(self, small_system):
        config = IntegratorConfig(dt=1e-3, t_end=0.025, snapshot_every=10, energy_audit_every=10)
        record = run(scenario_state("longitudinal", small_system), small_system, config)
        assert [round(s.t, 9) for s in record.snapshots] == [0.0, 0.01, 0.02, 0.025]
        assert len(record.energies) == len(record.energy_times) == len(record.gravity_work) == 4
        assert record.final.t == pytest.approx(0.025)
        assert record.steps is None

    def test_keep_steps_matches_integrate_steps(self, small_system):
        initial = scenario_state("slackening", small_system)
        record = run(initial, small_system, IntegratorConfig(dt=1e-3, t_end=0.05), keep_steps=True)
        reference = integrate_steps(initial, rhs_for(small_system), "verlet", 1e-3, 50)
        np.testing.assert_array_equal(record.steps.positions, reference.positions)

    def test_symmetric_motion_stays_symmetric(self, small_system):
        config = IntegratorConfig(dt=1e-3, t_end=10.0, snapshot_every=100, energy_audit_every=100)
        record = run(scenario_state("slackening", small_system), small_system, config)
        assert max(np.max(np.abs(s.theta)) for s in record.snapshots) <= 1e-9
        assert max(np.max(np.abs(s.p1 - s.p2)) for s in record.snapshots) <= 1e-9
        assert record.events
        assert {event.direction for event in record.events} <= {"slack", "taut"}
        assert {event.row for event in record.events} <= {1, 2}

    def test_no_events_without_exact_hangers(self, oscillator_system):
        record = run(deck_oscillation(y0=5.0), oscillator_system, IntegratorConfig(t_end=0.5))
        assert record.events == []

    @pytest.mark.slow
    def test_energy_audit_over_ten_seconds(self, default_system):
        config = IntegratorConfig(dt=1e-3, t_end=10.0)
        record = run(scenario_state("longitudinal", default_system), default_system, config)
        assert energy_drift(record)["secular"] <= 1e-5
        assert audit_total_44(record)["relative_mismatch"] <= 1e-4

    def test_drift_of_a_flat_series_is_zero(self, small_system):
        record = run(ModalState.zeros(4), small_system, IntegratorConfig(t_end=0.05))
        assert energy_drift(record) == {"secular": 0.0, "excursion": 0.0}


def test_forced_linear_response_matches_the_closed_form(oscillator_system):
    params = oscillator_system.params
    basis = oscillator_system.basis
    zero = np.zeros(basis.grid.size)
    shape = basis.e[0].copy()
    dt, n_steps = 1e-3, 20000

    def forcing(t):
        return zero, zero, math.cos(t) * shape, zero

    trajectory = integrate_steps(
        ModalState.zeros(1),
        lambda s: modal_rhs_forced_linear(s, oscillator_system, forcing),
        "verlet", dt, n_steps,
    )
    t = trajectory.times
    omega = math.sqrt(params.EI / params.M)
    phase = 2.0 * math.asin(omega * dt / 2.0) * np.arange(t.size)
    design = np.column_stack((np.cos(t), np.sin(t), np.cos(phase), np.sin(phase)))
    coefficients, *_ = np.linalg.lstsq(design, trajectory.positions[:, 2], rcond=None)
    expected = (1.0 / params.M) / (params.EI / params.M - 1.0)
    assert coefficients[0] == pytest.approx(expected, rel=1e-6)


class TestEnergyNorm:

    def test_distance_rejects_different_grids(self, small_system):
        a = frozen_trajectory(ModalState.zeros(4), PicardConfig(horizon=0.02))
        b = frozen_trajectory(ModalState.zeros(4), PicardConfig(horizon=0.01))
        with pytest.raises(ParameterError):
            zt_distance(a, b, small_system)

    def test_distance_weights_positions_by_stiffness(self, small_system):
        config = PicardConfig(horizon=0.002)
        base = frozen_trajectory(ModalState.zeros(4), config)
        q = np.zeros(16)
        q[2 * 4 + 1] = 1.0
        moved = frozen_trajectory(ModalState.from_vectors(0.0, q, np.zeros(16)), config)
        assert zt_distance(base, moved, small_system) == pytest.approx(4.0)


class TestPicard:

    @pytest.fixture(scope="class")
    def initial(self, default_system):
        return scenario_state("longitudinal", default_system)

    def test_converges_at_the_default_horizon(self, default_system, initial):
        config = PicardConfig(horizon=0.02)
        report = picard_solve(initial, default_system, config)
        assert report.converged
        assert report.iterations <= 20
        assert report.distances[-1] <= config.convergence_tol

        reference = integrate_steps(initial, rhs_for(default_system), "verlet", 1e-3, 20)
        assert np.max(np.abs(report.trajectory.positions - reference.positions)) <= 1e-4

    def test_contracts_at_small_horizon(self, default_system, initial):
        [(horizon, ratio)] = horizon_ladder(initial, default_system, PicardConfig(), horizons=(0.01,))
        assert horizon == 0.01
        assert ratio < 1.0

    def test_ratio_shrinks_with_the_horizon(self, default_system, initial):
        ladder = horizon_ladder(initial, default_system, PicardConfig(horizon=0.02))
        assert [h for h, _ in ladder] == [0.04, 0.02, 0.01]
        ratios = [r for _, r in ladder]
        assert ratios[0] > ratios[1] > ratios[2]

    def test_large_horizon_is_reported(self, small_system):
        initial = scenario_state("longitudinal", small_system)
        with pytest.raises(HorizonTooLargeError) as info:
            picard_solve(initial, small_system, PicardConfig(horizon=2.0))
        assert len(info.value.ratios) >= 3
        assert info.value.suggested_horizon < 2.0

    def test_identical_inputs_have_no_ratio(self, small_system):
        config = PicardConfig()
        frozen = frozen_trajectory(ModalState.zeros(4), config)
        with pytest.raises(ParameterError):
            contraction_ratio(frozen, frozen, ModalState.zeros(4), small_system, config)

    def test_map_checks_system_and_time_grid(self, small_system, oscillator_system):
        config = PicardConfig(horizon=0.02)
        frozen = frozen_trajectory(ModalState.zeros(4), PicardConfig(horizon=0.01))
        with pytest.raises(ParameterError):
            picard_map(frozen, ModalState.zeros(4), small_system, config)
        with pytest.raises(ParameterError):
            picard_map(frozen_trajectory(ModalState.zeros(1), config), ModalState.zeros(1),
                       oscillator_system, config)


@pytest.mark.slow
def test_galerkin_truncations_form_a_cauchy_sequence():
    distances = galerkin_cauchy_check(BridgeParams(), mode_counts=(8, 16, 32), t_end=1.0)
    assert 0.0 < distances["fine"] <= distances["coarse"]
