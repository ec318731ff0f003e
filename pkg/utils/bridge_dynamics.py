"""
Semi-discrete bridge dynamics in modal coordinates.

Unknowns: cable displacements p1, p2 expanded on the weighted cable modes,
deck deflection y and torsion theta expanded on the sine modes. The module
assembles the right-hand sides of the full bridge, the single cable-beam
system and the forced linear system, and evaluates the energy terms.
"""

import logging
import math
from dataclasses import dataclass, fields, replace
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from utils.cable_profile import CableParams, CableProfile, DEFAULT_TOLERANCE, solve_cable
from utils.errors import ParameterError
from utils.numerics_core import (
    DEFAULT_FD_POINTS,
    DEFAULT_IVP_STEPS,
    DEFAULT_PANEL_COUNT,
    DEFAULT_POINTS_PER_PANEL,
    make_grid,
)
from utils.restoring_forces import (
    HangerLaw,
    NonlocalOperatorData,
    build_hanger_law,
    build_nonlocal_operator,
)
from utils.weighted_spectral import SpectralBasis, project, solve_weighted_eigenbasis

logger = logging.getLogger(__name__)

MODE_FLAGS = ("full_bridge", "single_beam", "linear_decoupled")
HANGER_MODELS = ("exact", "linearized", "off")
FIELD_NAMES = ("p1", "p2", "y", "th")


@dataclass(frozen=True)
class BridgeParams:
    """Physical constants and discretization size of the bridge model."""
    M: float = 20.0
    m: float = 1.0
    ell: float = 0.2
    EI: float = 100.0
    GK: float = 50.0
    AE: float = 3000.0
    H0: float = 500.0
    g: float = 9.81
    kappa0: float = 2000.0
    n_modes: int = 16
    mode_flag: str = "full_bridge"
    printed_exponents: bool = False

    def __post_init__(self):
        for name in ("M", "m", "ell", "EI", "GK", "AE", "H0", "g", "kappa0"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ParameterError(f"bridge.{name} must be > 0, got {value!r}")
        if not isinstance(self.n_modes, int) or self.n_modes < 1:
            raise ParameterError(f"bridge.n_modes must be >= 1, got {self.n_modes!r}")
        if self.mode_flag not in MODE_FLAGS:
            raise ParameterError(f"bridge.mode_flag must be one of {MODE_FLAGS}, got {self.mode_flag!r}")

    @property
    def load_mass(self) -> float:
        """Deck mass per unit length carried by one cable."""
        return self.M if self.mode_flag == "single_beam" else 0.5 * self.M

    @property
    def deck_weight_per_row(self) -> float:
        return self.load_mass * self.g

    @property
    def torsion_inertia(self) -> float:
        return self.M * self.ell * self.ell / 3.0


@dataclass(frozen=True, eq=False)
class ModalState:
    """Modal coefficients and velocities at time t."""
    t: float
    p1: np.ndarray
    p2: np.ndarray
    y: np.ndarray
    theta: np.ndarray
    dp1: np.ndarray
    dp2: np.ndarray
    dy: np.ndarray
    dtheta: np.ndarray

    def __post_init__(self):
        n = np.shape(self.p1)
        for name in ("p2", "y", "theta", "dp1", "dp2", "dy", "dtheta"):
            if np.shape(getattr(self, name)) != n:
                raise ParameterError(f"state block {name} has shape {np.shape(getattr(self, name))}, expected {n}")

    @property
    def n_modes(self) -> int:
        return int(np.size(self.p1))

    @classmethod
    def zeros(cls, n_modes: int, t: float = 0.0) -> "ModalState":
        z = np.zeros(n_modes)
        return cls(t, z, z, z, z, z, z, z, z)

    @classmethod
    def from_vectors(cls, t: float, q: np.ndarray, v: np.ndarray) -> "ModalState":
        p1, p2, y, theta = np.split(q, 4)
        dp1, dp2, dy, dtheta = np.split(v, 4)
        return cls(t, p1, p2, y, theta, dp1, dp2, dy, dtheta)

    def positions(self) -> np.ndarray:
        return np.concatenate((self.p1, self.p2, self.y, self.theta))

    def velocities(self) -> np.ndarray:
        return np.concatenate((self.dp1, self.dp2, self.dy, self.dtheta))

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.positions())) and np.all(np.isfinite(self.velocities())))


class ModalAccelerations(NamedTuple):
    p1: np.ndarray
    p2: np.ndarray
    y: np.ndarray
    theta: np.ndarray

    def as_vector(self) -> np.ndarray:
        return np.concatenate(self)


@dataclass(frozen=True)
class EnergyBreakdown:
    """Energy terms of the bridge; totals last."""
    kinetic_deck_translation: float
    kinetic_deck_torsion: float
    kinetic_cables: float
    bending: float
    torsional_stiffness: float
    cable_stretch_nonlocal_1: float
    cable_stretch_nonlocal_2: float
    cable_quadratic: float
    cable_linear: float
    cable_gravity: float
    hanger_potential: float
    total_44: float
    total_corrected: float


ENERGY_TERMS = [f.name for f in fields(EnergyBreakdown)][:-2]
NONNEGATIVE_TERMS = [
    "kinetic_deck_translation", "kinetic_deck_torsion", "kinetic_cables", "bending",
    "torsional_stiffness", "cable_stretch_nonlocal_1", "cable_stretch_nonlocal_2",
    "cable_quadratic", "hanger_potential",
]


@dataclass(frozen=True, eq=False)
class BridgeSystem:
    """Everything a right-hand side evaluation needs, precomputed once."""
    params: BridgeParams
    profile: CableProfile
    basis: SpectralBasis
    law: HangerLaw
    nonlocal_op: NonlocalOperatorData
    hanger_model: str
    nonlocal_on: bool
    p_stiffness: np.ndarray
    y_stiffness: np.ndarray
    theta_stiffness: np.ndarray
    cable_projector: np.ndarray
    sine_projector: np.ndarray
    cable_mode_integrals: np.ndarray

    @property
    def n_modes(self) -> int:
        return self.params.n_modes

    @property
    def rows(self) -> int:
        return 1 if self.params.mode_flag == "single_beam" else 2


def build_system(params: BridgeParams, profile: CableProfile, basis: SpectralBasis,
                 law: Optional[HangerLaw] = None,
                 nonlocal_op: Optional[NonlocalOperatorData] = None,
                 hanger_model: Optional[str] = None) -> BridgeSystem:
    """Bundle precomputed operators for the right-hand sides."""
    if basis.n_modes != params.n_modes:
        raise ParameterError(f"basis has {basis.n_modes} modes, params ask for {params.n_modes}")
    if abs(profile.params.load_mass - params.load_mass) > 1e-12 * params.load_mass:
        raise ParameterError(
            f"profile carries load_mass={profile.params.load_mass:g}, "
            f"{params.mode_flag} needs {params.load_mass:g}"
        )
    if law is None:
        law = build_hanger_law(profile, params.kappa0, params.deck_weight_per_row)
    if nonlocal_op is None:
        nonlocal_op = build_nonlocal_operator(profile, basis, params.AE)
    linear = params.mode_flag == "linear_decoupled"
    if hanger_model is None:
        hanger_model = "off" if linear else "exact"
    if hanger_model not in HANGER_MODELS:
        raise ParameterError(f"hanger_model must be one of {HANGER_MODELS}, got {hanger_model!r}")

    k = basis.wavenumbers
    if params.printed_exponents:
        y_stiffness, theta_stiffness = params.EI * k ** 2, params.GK * k
    else:
        y_stiffness, theta_stiffness = params.EI * k ** 4, params.GK * k ** 2

    return BridgeSystem(
        params=params,
        profile=profile,
        basis=basis,
        law=law,
        nonlocal_op=nonlocal_op,
        hanger_model=hanger_model,
        nonlocal_on=not linear,
        p_stiffness=basis.lam,
        y_stiffness=y_stiffness,
        theta_stiffness=theta_stiffness,
        cable_projector=basis.cable_projector,
        sine_projector=basis.sine_projector,
        cable_mode_integrals=basis.u @ basis.grid.weights,
    )


def cable_params_for(params: BridgeParams, s0: float = 1.0) -> CableParams:
    """Cable data on the scaled span pi for the given bridge configuration."""
    return CableParams(H0=params.H0, m=params.m, load_mass=params.load_mass, g=params.g,
                       L=math.pi, s0=s0)


def assemble_system(params: BridgeParams, s0: float = 1.0,
                    panel_count: int = DEFAULT_PANEL_COUNT,
                    points_per_panel: int = DEFAULT_POINTS_PER_PANEL,
                    fd_points: int = DEFAULT_FD_POINTS,
                    ivp_steps: int = DEFAULT_IVP_STEPS,
                    tolerance: float = DEFAULT_TOLERANCE,
                    unit_weight: bool = False,
                    hanger_model: Optional[str] = None) -> BridgeSystem:
    """Cable profile, bases, hanger law and nonlocal operator for one run."""
    grid = make_grid(math.pi, panel_count, points_per_panel)
    profile = solve_cable(cable_params_for(params, s0), tolerance, grid, ivp_steps)
    basis = solve_weighted_eigenbasis(profile, params.n_modes, fd_points, unit_weight=unit_weight)
    return build_system(params, profile, basis, hanger_model=hanger_model)


def linear_counterpart(system: BridgeSystem) -> BridgeSystem:
    """Same operators with hangers and stretching switched off."""
    params = replace(system.params, mode_flag="linear_decoupled")
    return replace(system, params=params, hanger_model="off", nonlocal_on=False)


def project_initial_data(y0, theta0, p10, p20, y1, theta1, p11, p21,
                         basis: SpectralBasis) -> ModalState:
    """Project grid-sampled initial positions and velocities onto the modes."""
    return ModalState(
        t=0.0,
        p1=project(p10, basis, "weighted"),
        p2=project(p20, basis, "weighted"),
        y=project(y0, basis, "plain"),
        theta=project(theta0, basis, "plain"),
        dp1=project(p11, basis, "weighted"),
        dp2=project(p21, basis, "weighted"),
        dy=project(y1, basis, "plain"),
        dtheta=project(theta1, basis, "plain"),
    )


def hanger_arguments(state: ModalState, system: BridgeSystem) -> List[np.ndarray]:
    """Hanger elongation from the static state, one array per hanger row."""
    basis = system.basis
    y = state.y @ basis.e
    p1 = state.p1 @ basis.u
    if system.rows == 1:
        return [y - p1]
    lifted = system.params.ell * (state.theta @ basis.e)
    p2 = state.p2 @ basis.u
    return [y + lifted - p1, y - lifted - p2]


def _phi(system: BridgeSystem, d: np.ndarray) -> np.ndarray:
    if system.hanger_model == "exact":
        return system.law.phi(d)
    if system.hanger_model == "linearized":
        return system.law.phi_linearized(d)
    return np.zeros_like(d)


def _psi(system: BridgeSystem, d: np.ndarray) -> np.ndarray:
    if system.hanger_model == "exact":
        return system.law.psi(d)
    if system.hanger_model == "linearized":
        return system.law.psi_linearized(d)
    return np.zeros_like(d)


def nonlinear_forces(state: ModalState, system: BridgeSystem) -> ModalAccelerations:
    """Hanger and stretching loads on each modal equation (before dividing by mass)."""
    n = system.n_modes
    zero = np.zeros(n)
    phis = [_phi(system, d) for d in hanger_arguments(state, system)]
    stretch = system.nonlocal_op.modal_force if system.nonlocal_on else (lambda p: zero)

    f_p1 = stretch(state.p1) + system.cable_projector @ phis[0]
    if system.rows == 1:
        f_y = -(system.sine_projector @ phis[0])
        return ModalAccelerations(f_p1, zero, f_y, zero)

    f_p2 = stretch(state.p2) + system.cable_projector @ phis[1]
    f_y = -(system.sine_projector @ (phis[0] + phis[1]))
    f_th = system.params.ell * (system.sine_projector @ (phis[1] - phis[0]))
    return ModalAccelerations(f_p1, f_p2, f_y, f_th)


def nonlinear_potential(state: ModalState, system: BridgeSystem) -> float:
    """Potential whose negative gradient is nonlinear_forces."""
    weights = system.basis.grid.weights
    total = sum(float(np.dot(weights, _psi(system, d))) for d in hanger_arguments(state, system))
    if system.nonlocal_on:
        total += system.nonlocal_op.stretch_energy(state.p1)
        if system.rows == 2:
            total += system.nonlocal_op.stretch_energy(state.p2)
    return total


def nonlinear_loads_grid(state: ModalState, system: BridgeSystem) -> Tuple[np.ndarray, ...]:
    """Grid samples g1..g4 of the nonlinear and nonlocal terms frozen at a state."""
    phis = [_phi(system, d) for d in hanger_arguments(state, system)]
    size = system.basis.grid.size
    g1 = phis[0].copy()
    if system.nonlocal_on:
        g1 -= system.nonlocal_op.h_grid(state.p1)
    if system.rows == 1:
        zero = np.zeros(size)
        return g1, zero, -phis[0], zero
    g2 = phis[1].copy()
    if system.nonlocal_on:
        g2 -= system.nonlocal_op.h_grid(state.p2)
    g3 = -(phis[0] + phis[1])
    g4 = system.params.ell * (phis[1] - phis[0])
    return g1, g2, g3, g4


def _accelerations(state: ModalState, system: BridgeSystem,
                   loads: Sequence[np.ndarray]) -> ModalAccelerations:
    params = system.params
    return ModalAccelerations(
        (loads[0] - system.p_stiffness * state.p1) / params.m,
        (loads[1] - system.p_stiffness * state.p2) / params.m,
        (loads[2] - system.y_stiffness * state.y) / params.M,
        (loads[3] - system.theta_stiffness * state.theta) / params.torsion_inertia,
    )


def modal_rhs(state: ModalState, system: BridgeSystem) -> ModalAccelerations:
    """Accelerations of the full bridge (or of its linear part when decoupled)."""
    if system.params.mode_flag == "single_beam":
        raise ParameterError("modal_rhs covers the two-cable bridge; use single_beam_rhs")
    return _accelerations(state, system, nonlinear_forces(state, system))


def single_beam_rhs(state: ModalState, system: BridgeSystem) -> ModalAccelerations:
    """Accelerations of one cable coupled to a beam by one hanger row."""
    if system.params.mode_flag != "single_beam":
        raise ParameterError(f"single_beam_rhs needs mode_flag=single_beam, got {system.params.mode_flag}")
    loads = nonlinear_forces(state, system)
    acc = _accelerations(state, system, loads)
    zero = np.zeros(system.n_modes)
    return ModalAccelerations(acc.p1, zero, acc.y, zero)


Forcing = Callable[[float], Optional[Sequence[np.ndarray]]]


def modal_rhs_forced_linear(state: ModalState, system: BridgeSystem,
                            forcing: Forcing) -> ModalAccelerations:
    """Accelerations of the linear decoupled system driven by grid forcings g1..g4."""
    if system.params.mode_flag != "linear_decoupled":
        raise ParameterError(
            f"forced linear system needs mode_flag=linear_decoupled, got {system.params.mode_flag}"
        )
    g = forcing(state.t)
    if g is None:
        zero = np.zeros(system.n_modes)
        loads = (zero, zero, zero, zero)
    else:
        loads = (
            system.cable_projector @ g[0],
            system.cable_projector @ g[1],
            system.sine_projector @ g[2],
            system.sine_projector @ g[3],
        )
    return _accelerations(state, system, loads)


def rhs_for(system: BridgeSystem) -> Callable[[ModalState], ModalAccelerations]:
    """Right-hand side matching the system's mode flag."""
    if system.params.mode_flag == "single_beam":
        return lambda state: single_beam_rhs(state, system)
    return lambda state: modal_rhs(state, system)


def energy(state: ModalState, system: BridgeSystem) -> EnergyBreakdown:
    """Evaluate every energy term by quadrature on the reconstructed fields."""
    params = system.params
    basis = system.basis
    profile = system.profile
    w = basis.grid.weights
    xi = basis.weight

    def quad(values):
        return float(np.dot(w, values))

    p1, p2 = state.p1 @ basis.u, state.p2 @ basis.u
    dp1, dp2 = state.p1 @ basis.du, state.p2 @ basis.du
    v1, v2 = state.dp1 @ basis.u, state.dp2 @ basis.u
    y_curv = state.y @ basis.dde
    th_slope = state.theta @ basis.de
    y_rate = state.dy @ basis.e
    th_rate = state.dtheta @ basis.e

    if system.nonlocal_on:
        prefactor = system.nonlocal_op.prefactor
        slope_over_xi = system.nonlocal_op.slope_over_xi
        stretch_1 = 0.5 * prefactor * quad(slope_over_xi * dp1) ** 2
        stretch_2 = 0.5 * prefactor * quad(slope_over_xi * dp2) ** 2
    else:
        stretch_1 = stretch_2 = 0.0

    hanger = sum(quad(_psi(system, d)) for d in hanger_arguments(state, system))
    terms = dict(
        kinetic_deck_translation=0.5 * params.M * quad(y_rate * y_rate),
        kinetic_deck_torsion=0.5 * params.torsion_inertia * quad(th_rate * th_rate),
        kinetic_cables=0.5 * params.m * quad(xi * (v1 * v1 + v2 * v2)),
        bending=0.5 * params.EI * quad(y_curv * y_curv),
        torsional_stiffness=0.5 * params.GK * quad(th_slope * th_slope),
        cable_stretch_nonlocal_1=stretch_1,
        cable_stretch_nonlocal_2=stretch_2,
        cable_quadratic=params.H0 * quad((dp1 * dp1 + dp2 * dp2) / (2.0 * xi * xi)),
        cable_linear=-params.H0 * quad(profile.s_prime * (dp1 + dp2)),
        cable_gravity=-params.m * params.g * quad((p1 + p2) * xi),
        hanger_potential=hanger,
    )
    total_44 = sum(terms.values())
    correction = system.law.W * quad(p1 + p2)
    return EnergyBreakdown(**terms, total_44=total_44, total_corrected=total_44 - correction)


def theta_energy_share(breakdown: EnergyBreakdown) -> float:
    """Share of the nonnegative energy held by the torsional motion."""
    positive = sum(getattr(breakdown, name) for name in NONNEGATIVE_TERMS)
    if positive <= 0.0:
        return 0.0
    return (breakdown.kinetic_deck_torsion + breakdown.torsional_stiffness) / positive


def energy_bounds(energies: Sequence[EnergyBreakdown]) -> Dict[str, float]:
    """Largest value of each nonnegative term relative to the initial corrected energy.

    Conservation bounds every nonnegative term by E(0), so each ratio should
    stay at or below one up to integration error.
    """
    if not energies:
        return {}
    reference = energies[0].total_corrected
    if reference <= 0.0:
        return {name: 0.0 for name in NONNEGATIVE_TERMS}
    return {
        name: max(getattr(item, name) for item in energies) / reference
        for name in NONNEGATIVE_TERMS
    }


def state_columns(n_modes: int) -> List[str]:
    labels = range(1, n_modes + 1)
    positions = [f"{name}_{k}" for name in FIELD_NAMES for k in labels]
    velocities = [f"d{name}_{k}" for name in FIELD_NAMES for k in labels]
    return ["t"] + positions + velocities


def snapshot_table(snapshots: Sequence[ModalState]) -> pd.DataFrame:
    """State snapshots as rows: t, positions block by block, then velocities."""
    if not snapshots:
        raise ParameterError("no snapshots to tabulate")
    rows = [np.concatenate(([s.t], s.positions(), s.velocities())) for s in snapshots]
    return pd.DataFrame(np.vstack(rows), columns=state_columns(snapshots[0].n_modes))


def energy_table(times: Sequence[float], energies: Sequence[EnergyBreakdown]) -> pd.DataFrame:
    """Energy series: t, both totals, then every term in declaration order."""
    columns = ["t", "total_44", "total_corrected"] + ENERGY_TERMS
    rows = [
        [t, e.total_44, e.total_corrected] + [getattr(e, name) for name in ENERGY_TERMS]
        for t, e in zip(times, energies)
    ]
    return pd.DataFrame(rows, columns=columns)
