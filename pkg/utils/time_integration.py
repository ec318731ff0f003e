"""
Time stepping for the modal bridge system and the Picard fixed-point oracle.

The steppers work on flat position/velocity vectors (p1, p2, y, theta blocks)
and call the right-hand side through ModalState views.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from utils.bridge_dynamics import (
    BridgeParams,
    BridgeSystem,
    EnergyBreakdown,
    ModalAccelerations,
    ModalState,
    build_system,
    cable_params_for,
    energy,
    hanger_arguments,
    linear_counterpart,
    modal_rhs_forced_linear,
    nonlinear_loads_grid,
    rhs_for,
)
from utils.cable_profile import DEFAULT_TOLERANCE, solve_cable
from utils.errors import BlowUpError, HorizonTooLargeError, NumericalError, ParameterError
from utils.numerics_core import (
    DEFAULT_FD_POINTS,
    DEFAULT_IVP_STEPS,
    DEFAULT_PANEL_COUNT,
    DEFAULT_POINTS_PER_PANEL,
    make_grid,
)
from utils.restoring_forces import build_hanger_law
from utils.scenarios import scenario_state, slack_scales
from utils.weighted_spectral import FD_POINTS_PER_MODE, solve_weighted_eigenbasis

logger = logging.getLogger(__name__)

METHODS = ("verlet", "rk4")
MAX_LADDER_WORKERS = 4

Rhs = Callable[[ModalState], ModalAccelerations]


@dataclass(frozen=True)
class IntegratorConfig:
    method: str = "verlet"
    dt: float = 1e-3
    t_end: float = 10.0
    snapshot_every: int = 10
    energy_audit_every: int = 10

    def __post_init__(self):
        if self.method not in METHODS:
            raise ParameterError(f"integrator.method must be one of {METHODS}, got {self.method!r}")
        if not (math.isfinite(self.dt) and self.dt > 0):
            raise ParameterError(f"integrator.dt must be > 0, got {self.dt!r}")
        if not (math.isfinite(self.t_end) and self.t_end > 0):
            raise ParameterError(f"integrator.t_end must be > 0, got {self.t_end!r}")
        for name in ("snapshot_every", "energy_audit_every"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ParameterError(f"integrator.{name} must be >= 1, got {value!r}")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.t_end / self.dt)))


@dataclass(frozen=True)
class PicardConfig:
    horizon: float = 0.02
    max_iterations: int = 20
    convergence_tol: float = 1e-6
    inner_dt: float = 1e-3
    patience: int = 3
    method: str = "verlet"

    def __post_init__(self):
        for name in ("horizon", "convergence_tol", "inner_dt"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"picard.{name} must be > 0, got {value!r}")
        for name in ("max_iterations", "patience"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise ParameterError(f"picard.{name} must be >= 1, got {value!r}")
        if self.method not in METHODS:
            raise ParameterError(f"picard.method must be one of {METHODS}, got {self.method!r}")

    @property
    def n_steps(self) -> int:
        return max(1, int(round(self.horizon / self.inner_dt)))


@dataclass(frozen=True)
class SlackEvent:
    t: float
    node_index: int
    row: int
    direction: str

    def as_dict(self) -> Dict[str, object]:
        return {"t": self.t, "node_index": self.node_index, "row": self.row,
                "direction": self.direction}


@dataclass(frozen=True, eq=False)
class SampledTrajectory:
    """Positions and velocities at every step of a uniform time grid."""
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray

    def state_at(self, index: int) -> ModalState:
        return ModalState.from_vectors(float(self.times[index]), self.positions[index],
                                       self.velocities[index])


@dataclass(eq=False)
class TrajectoryRecord:
    snapshots: List[ModalState] = field(default_factory=list)
    energy_times: List[float] = field(default_factory=list)
    energies: List[EnergyBreakdown] = field(default_factory=list)
    gravity_work: List[float] = field(default_factory=list)
    events: List[SlackEvent] = field(default_factory=list)
    final: Optional[ModalState] = None
    steps: Optional[SampledTrajectory] = None


def _vector_rhs(rhs: Rhs):
    def accel(t, q, v):
        return rhs(ModalState.from_vectors(t, q, v)).as_vector()
    return accel


def _verlet(t, q, v, a, accel, dt):
    q_next = q + dt * v + (0.5 * dt * dt) * a
    a_next = accel(t + dt, q_next, v)
    v_next = v + (0.5 * dt) * (a + a_next)
    return q_next, v_next, a_next


def _rk4(t, q, v, accel, dt):
    half = 0.5 * dt
    k1q, k1v = v, accel(t, q, v)
    k2q = v + half * k1v
    k2v = accel(t + half, q + half * k1q, k2q)
    k3q = v + half * k2v
    k3v = accel(t + half, q + half * k2q, k3q)
    k4q = v + dt * k3v
    k4v = accel(t + dt, q + dt * k3q, k4q)
    q_next = q + (dt / 6.0) * (k1q + 2.0 * k2q + 2.0 * k3q + k4q)
    v_next = v + (dt / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
    return q_next, v_next


def _finite(q, v) -> bool:
    return bool(np.all(np.isfinite(q)) and np.all(np.isfinite(v)))


def step(state: ModalState, rhs: Rhs, config: IntegratorConfig) -> ModalState:
    """Advance one step of size config.dt."""
    accel = _vector_rhs(rhs)
    q, v, t, dt = state.positions(), state.velocities(), state.t, config.dt
    if config.method == "verlet":
        q, v, _ = _verlet(t, q, v, accel(t, q, v), accel, dt)
    else:
        q, v = _rk4(t, q, v, accel, dt)
    if not _finite(q, v):
        raise BlowUpError(t + dt)
    return ModalState.from_vectors(t + dt, q, v)


def integrate_steps(initial: ModalState, rhs: Rhs, method: str, dt: float,
                    n_steps: int) -> SampledTrajectory:
    """Fixed-step integration keeping every step."""
    if method not in METHODS:
        raise ParameterError(f"method must be one of {METHODS}, got {method!r}")
    accel = _vector_rhs(rhs)
    q, v = initial.positions(), initial.velocities()
    times = initial.t + dt * np.arange(n_steps + 1, dtype=float)
    positions = np.empty((n_steps + 1, q.size))
    velocities = np.empty((n_steps + 1, v.size))
    positions[0], velocities[0] = q, v

    a = accel(times[0], q, v) if method == "verlet" else None
    for i in range(1, n_steps + 1):
        if method == "verlet":
            q, v, a = _verlet(times[i - 1], q, v, a, accel, dt)
        else:
            q, v = _rk4(times[i - 1], q, v, accel, dt)
        if not _finite(q, v):
            partial = SampledTrajectory(times[:i], positions[:i], velocities[:i])
            raise BlowUpError(float(times[i]), partial)
        positions[i], velocities[i] = q, v
    return SampledTrajectory(times, positions, velocities)


def _slack_masks(state: ModalState, system: BridgeSystem) -> List[np.ndarray]:
    law = system.law
    return [law.kappa * d < -law.W for d in hanger_arguments(state, system)]


def run(initial: ModalState, system: BridgeSystem, config: IntegratorConfig,
        rhs: Optional[Rhs] = None, keep_steps: bool = False) -> TrajectoryRecord:
    """Integrate to config.t_end, recording snapshots, energies and slack events.

    gravity_work accumulates W * integral of (dp1 + dp2) over space and time;
    it is the expected change of total_44. Verlet steps integrate the
    half-step velocity v + dt/2 a, rk4 steps use the trapezoid rule.
    """
    accel = _vector_rhs(rhs or rhs_for(system))
    dt, n_steps = config.dt, config.n_steps
    n = system.n_modes
    q, v = initial.positions().copy(), initial.velocities().copy()
    t0 = initial.t
    detect = system.hanger_model == "exact"
    W = system.law.W
    mode_integrals = system.cable_mode_integrals

    def work_rate(vel):
        return W * float(np.dot(mode_integrals, vel[:n] + vel[n:2 * n]))

    record = TrajectoryRecord()
    state = ModalState.from_vectors(t0, q, v)
    record.snapshots.append(state)
    record.energy_times.append(t0)
    record.energies.append(energy(state, system))
    record.gravity_work.append(0.0)
    if keep_steps:
        times = t0 + dt * np.arange(n_steps + 1, dtype=float)
        positions = np.empty((n_steps + 1, q.size))
        velocities = np.empty((n_steps + 1, v.size))
        positions[0], velocities[0] = q, v

    masks = _slack_masks(state, system) if detect else []
    work, rate_prev = 0.0, work_rate(v)
    a = accel(t0, q, v) if config.method == "verlet" else None

    for i in range(1, n_steps + 1):
        t_prev, t = t0 + (i - 1) * dt, t0 + i * dt
        if config.method == "verlet":
            work += dt * work_rate(v + (0.5 * dt) * a)
            q, v, a = _verlet(t_prev, q, v, a, accel, dt)
        else:
            q, v = _rk4(t_prev, q, v, accel, dt)
            rate = work_rate(v)
            work += 0.5 * dt * (rate_prev + rate)
            rate_prev = rate
        if not _finite(q, v):
            record.final = state
            logger.error("Blow-up at t=%.6g after %d steps", t, i)
            raise BlowUpError(t, record)
        state = ModalState.from_vectors(t, q, v)

        if detect:
            new_masks = _slack_masks(state, system)
            for row, (old, new) in enumerate(zip(masks, new_masks), start=1):
                for node in np.flatnonzero(old != new):
                    record.events.append(
                        SlackEvent(t, int(node), row, "slack" if new[node] else "taut")
                    )
            masks = new_masks

        if keep_steps:
            positions[i], velocities[i] = q, v
        if i % config.snapshot_every == 0 or i == n_steps:
            record.snapshots.append(state)
        if i % config.energy_audit_every == 0 or i == n_steps:
            record.energy_times.append(t)
            record.energies.append(energy(state, system))
            record.gravity_work.append(work)

    record.final = state
    if keep_steps:
        record.steps = SampledTrajectory(times, positions, velocities)
    logger.info("Integrated %d %s steps to t=%.6g; %d slack events", n_steps, config.method,
                state.t, len(record.events))
    return record


def energy_drift(record: TrajectoryRecord) -> Dict[str, float]:
    """Secular drift and largest excursion of total_corrected, relative to |E(0)|.

    The secular drift is the least-squares trend over the record times its
    duration; oscillating integration error does not contribute to it.
    """
    t = np.asarray(record.energy_times)
    values = np.array([e.total_corrected for e in record.energies])
    reference = abs(values[0]) if values[0] != 0.0 else float(np.max(np.abs(values)))
    if reference == 0.0 or values.size < 2:
        return {"secular": 0.0, "excursion": 0.0}
    slope = np.polyfit(t - t[0], values, 1)[0]
    return {
        "secular": float(abs(slope * (t[-1] - t[0])) / reference),
        "excursion": float(np.max(np.abs(values - values[0])) / reference),
    }


def audit_total_44(record: TrajectoryRecord) -> Dict[str, float]:
    """Compare the change of total_44 with the integrated gravity work."""
    change = np.array([e.total_44 for e in record.energies]) - record.energies[0].total_44
    work = np.asarray(record.gravity_work)
    scale = float(np.max(np.abs(work)))
    mismatch = float(np.max(np.abs(change - work)))
    return {
        "max_total_44_change": float(np.max(np.abs(change))),
        "max_gravity_work": scale,
        "relative_mismatch": mismatch / scale if scale > 0 else mismatch,
    }


def zt_weights(system: BridgeSystem) -> np.ndarray:
    """Position weights of the sup-in-time energy norm: H1_xi, H1_xi, H2, H1."""
    k = system.basis.wavenumbers
    return np.concatenate((system.basis.lam, system.basis.lam, k ** 4, k ** 2))


def zt_distance(a: SampledTrajectory, b: SampledTrajectory, system: BridgeSystem) -> float:
    """Discrete sup-in-time energy-norm distance between two trajectories."""
    if a.positions.shape != b.positions.shape or a.velocities.shape != b.velocities.shape:
        raise ParameterError("trajectories sampled on different grids")
    weights = zt_weights(system)
    n = system.n_modes
    dq = a.positions - b.positions
    dv = a.velocities - b.velocities
    total = 0.0
    for block in range(4):
        cols = slice(block * n, (block + 1) * n)
        total += float(np.max(np.sum(weights[cols] * dq[:, cols] ** 2, axis=1)))
        total += float(np.max(np.sum(dv[:, cols] ** 2, axis=1)))
    return math.sqrt(total)


def frozen_trajectory(initial: ModalState, config: PicardConfig) -> SampledTrajectory:
    """The initial state held constant over the Picard window."""
    count = config.n_steps + 1
    times = config.inner_dt * np.arange(count, dtype=float)
    return SampledTrajectory(times, np.tile(initial.positions(), (count, 1)),
                             np.tile(initial.velocities(), (count, 1)))


def _check_picard_system(system: BridgeSystem) -> None:
    if system.params.mode_flag != "full_bridge":
        raise ParameterError("the Picard oracle runs on the full bridge system")


def picard_map(input_trajectory: SampledTrajectory, initial: ModalState,
               system: BridgeSystem, config: PicardConfig) -> SampledTrajectory:
    """Solve the linear system driven by the nonlinear terms of a given trajectory."""
    _check_picard_system(system)
    dt = config.inner_dt
    expected = dt * np.arange(config.n_steps + 1, dtype=float)
    times = input_trajectory.times
    if times.shape != expected.shape or np.max(np.abs(times - expected)) > 1e-9 * dt:
        raise ParameterError(
            f"input trajectory must be sampled every {dt:g} on [0, {config.n_steps * dt:g}]"
        )

    loads = [nonlinear_loads_grid(input_trajectory.state_at(i), system) for i in range(times.size)]
    last = len(loads) - 1

    def forcing(t):
        position = t / dt
        index = min(max(int(math.floor(position + 1e-9)), 0), last)
        frac = position - index
        if frac <= 1e-9 or index == last:
            return loads[index]
        lo, hi = loads[index], loads[index + 1]
        return tuple((1.0 - frac) * g0 + frac * g1 for g0, g1 in zip(lo, hi))

    linear = linear_counterpart(system)
    start = ModalState.from_vectors(0.0, initial.positions(), initial.velocities())
    return integrate_steps(start, lambda s: modal_rhs_forced_linear(s, linear, forcing),
                           config.method, dt, config.n_steps)


@dataclass(eq=False)
class PicardReport:
    trajectory: SampledTrajectory
    distances: List[float]
    ratios: List[float]
    converged: bool

    @property
    def iterations(self) -> int:
        return len(self.distances)


def picard_solve(initial: ModalState, system: BridgeSystem, config: PicardConfig) -> PicardReport:
    """Iterate the Picard map from the frozen initial state until it settles."""
    _check_picard_system(system)
    current = frozen_trajectory(initial, config)
    distances: List[float] = []
    ratios: List[float] = []
    streak = 0

    for iteration in range(1, config.max_iterations + 1):
        following = picard_map(current, initial, system, config)
        distance = zt_distance(following, current, system)
        if distances:
            previous = distances[-1]
            ratio = distance / previous if previous > 0 else math.inf
            ratios.append(ratio)
            streak = streak + 1 if not ratio < 1.0 else 0
            if streak >= config.patience:
                raise HorizonTooLargeError(config.horizon, ratios)
        distances.append(distance)
        current = following
        logger.debug("Picard iteration %d: distance=%.3e", iteration, distance)
        if distance <= config.convergence_tol:
            logger.info("Picard converged in %d iterations (distance %.3e)", iteration, distance)
            return PicardReport(current, distances, ratios, True)

    raise NumericalError(
        f"Picard iteration did not reach {config.convergence_tol:g} in "
        f"{config.max_iterations} iterations (last distance {distances[-1]:.3e})"
    )


def contraction_ratio(input_a: SampledTrajectory, input_b: SampledTrajectory,
                      initial: ModalState, system: BridgeSystem, config: PicardConfig) -> float:
    """Distance between two Picard images relative to the distance of the inputs."""
    spread = zt_distance(input_a, input_b, system)
    if spread == 0.0:
        raise ParameterError("contraction ratio needs two different inputs")
    image_a = picard_map(input_a, initial, system, config)
    image_b = picard_map(input_b, initial, system, config)
    return zt_distance(image_a, image_b, system) / spread


def _perturbed(trajectory: SampledTrajectory, system: BridgeSystem, size: float) -> SampledTrajectory:
    # vanishes at t = 0 so both inputs share the initial data
    n = system.n_modes
    pattern = np.zeros(trajectory.positions.shape[1])
    pattern[[0, 2 * n, 3 * n]] = 1.0
    horizon = trajectory.times[-1]
    s = (trajectory.times / horizon) ** 2
    ds = 2.0 * trajectory.times / horizon ** 2
    return SampledTrajectory(
        trajectory.times,
        trajectory.positions + size * s[:, None] * pattern,
        trajectory.velocities + size * ds[:, None] * pattern,
    )


def horizon_ladder(initial: ModalState, system: BridgeSystem, config: PicardConfig,
                   horizons: Optional[Sequence[float]] = None,
                   workers: int = MAX_LADDER_WORKERS) -> List[Tuple[float, float]]:
    """Measured contraction ratio for a ladder of horizons, evaluated in parallel."""
    _check_picard_system(system)
    if horizons is None:
        horizons = (2.0 * config.horizon, config.horizon, 0.5 * config.horizon)
    size = 1e-3 * slack_scales(system)["min"]
    rhs = rhs_for(system)

    def measure(horizon):
        window = replace(config, horizon=horizon)
        base = integrate_steps(initial, rhs, window.method, window.inner_dt, window.n_steps)
        return contraction_ratio(base, _perturbed(base, system, size), initial, system, window)

    with ThreadPoolExecutor(max_workers=max(1, min(workers, len(horizons)))) as executor:
        futures = [executor.submit(measure, horizon) for horizon in horizons]
        ratios = [future.result() for future in futures]

    for horizon, ratio in zip(horizons, ratios):
        logger.info("Contraction ratio at horizon %g: %.4g", horizon, ratio)
    return list(zip(horizons, ratios))


def _pad_modes(trajectory: SampledTrajectory, n: int, n_max: int) -> SampledTrajectory:
    def pad(array):
        blocks = array.reshape(array.shape[0], 4, n)
        padded = np.zeros((array.shape[0], 4, n_max))
        padded[:, :, :n] = blocks
        return padded.reshape(array.shape[0], 4 * n_max)
    return SampledTrajectory(trajectory.times, pad(trajectory.positions), pad(trajectory.velocities))


def galerkin_cauchy_check(params: BridgeParams, mode_counts: Sequence[int] = (8, 16, 32),
                          t_end: float = 1.0, dt: float = 2e-4,
                          scenario: str = "longitudinal", amplitude: Optional[float] = None,
                          s0: float = 1.0, panel_count: int = DEFAULT_PANEL_COUNT,
                          points_per_panel: int = DEFAULT_POINTS_PER_PANEL,
                          fd_points: Optional[int] = None,
                          ivp_steps: int = DEFAULT_IVP_STEPS) -> Dict[str, float]:
    """Distances between Galerkin trajectories of increasing size.

    The truncations must form a Cauchy sequence: each refinement moves the
    trajectory less than the previous one.
    """
    counts = sorted(int(n) for n in mode_counts)
    if len(counts) != 3:
        raise ParameterError("galerkin_cauchy_check needs three mode counts")
    n_max = counts[-1]
    fd_points = fd_points or max(DEFAULT_FD_POINTS, FD_POINTS_PER_MODE * n_max)
    grid = make_grid(math.pi, panel_count, points_per_panel)
    profile = solve_cable(cable_params_for(params, s0), DEFAULT_TOLERANCE, grid, ivp_steps)
    law = build_hanger_law(profile, params.kappa0, params.deck_weight_per_row)
    n_steps = max(1, int(round(t_end / dt)))

    padded = {}
    reference = None
    for n in counts:
        sized = replace(params, n_modes=n)
        basis = solve_weighted_eigenbasis(profile, n, fd_points)
        system = build_system(sized, profile, basis, law=law)
        initial = scenario_state(scenario, system, amplitude)
        trajectory = integrate_steps(initial, rhs_for(system), "verlet", dt, n_steps)
        padded[n] = _pad_modes(trajectory, n, n_max)
        reference = system

    coarse = zt_distance(padded[counts[1]], padded[counts[0]], reference)
    fine = zt_distance(padded[counts[2]], padded[counts[1]], reference)
    logger.info("Galerkin refinement distances: %d->%d %.3e, %d->%d %.3e",
                counts[0], counts[1], coarse, counts[1], counts[2], fine)
    return {"coarse": coarse, "fine": fine}
