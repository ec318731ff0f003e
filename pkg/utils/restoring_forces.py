"""
Restoring forces acting on the cables and the deck.

HangerLaw models continuum hangers as springs that carry no force once
slack. NonlocalOperatorData holds the precomputed pieces of the cable
stretching force, which is rank one in modal coordinates.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np
import pandas as pd

from utils.cable_profile import CableProfile
from utils.errors import ParameterError
from utils.weighted_spectral import SpectralBasis, project, reconstruct

logger = logging.getLogger(__name__)

CABLE_FORCE_MODELS = ("first_order", "timoshenko", "biot_von_karman")
FORCE_COMPARE_COLUMNS = ["x", "h_first_order", "h_timoshenko", "h_bvk"]


@dataclass(frozen=True, eq=False)
class HangerLaw:
    """Hanger stiffness along the span and the slackening force law.

    W is the deck weight carried by one hanger row, per unit length.
    Phi = F - W is the force measured from the static state and Psi its
    antiderivative with Psi(0) = 0.
    """
    kappa0: float
    W: float
    kappa: np.ndarray
    unloaded_length: np.ndarray
    slack_threshold: np.ndarray

    @property
    def lipschitz(self) -> float:
        return float(np.max(self.kappa))

    def phi(self, d: np.ndarray) -> np.ndarray:
        return np.maximum(self.kappa * d, -self.W)

    def phi_linearized(self, d: np.ndarray) -> np.ndarray:
        return self.kappa * d

    def force(self, d: np.ndarray) -> np.ndarray:
        return self.phi(d) + self.W

    def psi(self, d: np.ndarray) -> np.ndarray:
        taut = self.kappa * d >= -self.W
        slack_value = -self.W * d - self.W * self.W / (2.0 * self.kappa)
        return np.where(taut, 0.5 * self.kappa * d * d, slack_value)

    def psi_linearized(self, d: np.ndarray) -> np.ndarray:
        return 0.5 * self.kappa * d * d


def build_hanger_law(profile: CableProfile, kappa0: float,
                     deck_weight_per_hanger_row: float) -> HangerLaw:
    """Hanger law whose static elongation balances the deck weight exactly."""
    if not kappa0 > 0:
        raise ParameterError(f"kappa0 must be > 0, got {kappa0!r}")
    W = float(deck_weight_per_hanger_row)
    if not W >= 0:
        raise ParameterError(f"deck weight per hanger row must be >= 0, got {W!r}")
    if np.any(profile.s <= 0.0):
        raise ParameterError("cable profile reaches the deck (s <= 0); hangers need positive length")

    unloaded = profile.s / (1.0 + W / kappa0)
    kappa = kappa0 / unloaded
    threshold = -W / kappa
    for array in (unloaded, kappa, threshold):
        array.setflags(write=False)

    logger.debug(
        "Hanger law: kappa0=%g W=%g; slack hangers give Phi = -W < 0 (Phi = F - W, no sign restriction)",
        kappa0, W,
    )

    return HangerLaw(kappa0=float(kappa0), W=W, kappa=kappa, unloaded_length=unloaded,
                     slack_threshold=threshold)


def hanger_force(law: HangerLaw, displacement: float, node_index: int) -> Tuple[float, float, float]:
    """(F, Phi, Psi) for one hanger displacement at one node."""
    if not 0 <= node_index < law.kappa.size:
        raise ParameterError(f"node_index {node_index} outside [0, {law.kappa.size})")
    kappa = law.kappa[node_index]
    W = law.W
    phi = max(kappa * displacement, -W)
    if kappa * displacement >= -W:
        psi = 0.5 * kappa * displacement * displacement
    else:
        psi = -W * displacement - W * W / (2.0 * kappa)
    return float(phi + W), float(phi), float(psi)


@dataclass(frozen=True, eq=False)
class NonlocalOperatorData:
    """Rank-one cable stretching force.

    a_k pairs s'/xi with u_k', b_k pairs s''/xi^3 with u_k; the two agree up to
    sign by integration by parts.
    """
    prefactor: float
    a_vec: np.ndarray
    b_vec: np.ndarray
    b_grid: np.ndarray
    slope_over_xi: np.ndarray
    weights: np.ndarray

    def modal_force(self, p: np.ndarray) -> np.ndarray:
        """Modal load entering the cable equation: -(AE/L_c)(a.p) a.

        Equal to (AE/L_c)(a.p) b up to quadrature error; the a-form is the
        exact negative gradient of stretch_energy.
        """
        return -self.prefactor * float(np.dot(self.a_vec, p)) * self.a_vec

    def h_grid(self, p: np.ndarray) -> np.ndarray:
        """h(p) at the nodes from the rank-one form."""
        return -self.prefactor * float(np.dot(self.a_vec, p)) * self.b_grid

    def h_direct(self, p_prime: np.ndarray) -> np.ndarray:
        """h(p) at the nodes by direct quadrature of the span integral."""
        span_integral = float(np.dot(self.weights, self.slope_over_xi * p_prime))
        return -self.prefactor * span_integral * self.b_grid

    def stretch_energy(self, p: np.ndarray) -> float:
        stretch = float(np.dot(self.a_vec, p))
        return 0.5 * self.prefactor * stretch * stretch


def build_nonlocal_operator(profile: CableProfile, basis: SpectralBasis,
                            AE: float) -> NonlocalOperatorData:
    """Precompute the nonlocal stretching operator on the basis grid."""
    if not basis.grid.matches(profile.grid):
        raise ParameterError("basis grid differs from the profile grid")
    if not AE > 0:
        raise ParameterError(f"AE must be > 0, got {AE!r}")

    xi = basis.weight
    weights = basis.grid.weights
    slope_over_xi = profile.s_prime / xi
    b_grid = profile.s_second / xi ** 3
    a_vec = basis.du @ (weights * slope_over_xi)
    b_vec = basis.u @ (weights * b_grid)
    for array in (slope_over_xi, b_grid, a_vec, b_vec):
        array.setflags(write=False)

    return NonlocalOperatorData(
        prefactor=AE / profile.L_c,
        a_vec=a_vec,
        b_vec=b_vec,
        b_grid=b_grid,
        slope_over_xi=slope_over_xi,
        weights=weights,
    )


def alt_cable_force(model: str, profile: CableProfile, basis: SpectralBasis, AE: float,
                    p_samples: np.ndarray, p_prime_samples: np.ndarray,
                    unit_weight: bool = False) -> np.ndarray:
    """Cable stretching force under one of three modelling choices.

    first_order is the linearized force used by the dynamics. timoshenko keeps
    the quadratic length increment and biot_von_karman drops it; both act on
    the displaced curvature s'' - p''. p'' comes from the sine expansion of p.
    """
    if model not in CABLE_FORCE_MODELS:
        raise ParameterError(f"unknown cable force model {model!r}; expected one of {CABLE_FORCE_MODELS}")
    p = np.asarray(p_samples, dtype=float)
    dp = np.asarray(p_prime_samples, dtype=float)
    grid = basis.grid
    if p.shape != grid.nodes.shape or dp.shape != grid.nodes.shape:
        raise ParameterError("force samples must live on the basis grid")

    scale = AE / profile.L_c
    if model == "first_order":
        xi = np.ones(grid.size) if unit_weight else profile.xi
        span_integral = float(np.dot(grid.weights, profile.s_prime * dp / xi))
        return -scale * span_integral * profile.s_second / xi ** 3

    params = profile.params
    load_ratio = params.load_mass * params.g / params.H0
    p_second = reconstruct(project(p, basis, "plain"), basis, "sine", derivative=2)
    curvature = profile.s_second - p_second
    if model == "timoshenko":
        span_integral = float(np.dot(grid.weights, load_ratio * p + 0.5 * dp * dp))
    else:
        span_integral = load_ratio * float(np.dot(grid.weights, p))
    return scale * span_integral * curvature


def force_comparison_table(profile: CableProfile, basis: SpectralBasis, AE: float,
                           p_samples: np.ndarray, p_prime_samples: np.ndarray) -> pd.DataFrame:
    """The three cable force models side by side."""
    columns = {"x": basis.grid.nodes}
    for model, column in zip(CABLE_FORCE_MODELS, FORCE_COMPARE_COLUMNS[1:]):
        columns[column] = alt_cable_force(model, profile, basis, AE, p_samples, p_prime_samples)
    return pd.DataFrame(columns, columns=FORCE_COMPARE_COLUMNS)


def force_spread(table: pd.DataFrame) -> float:
    """Largest pointwise disagreement between the models, relative to their peak."""
    values = table[FORCE_COMPARE_COLUMNS[1:]].to_numpy()
    peak = float(np.max(np.abs(values)))
    if peak == 0.0:
        return 0.0
    return float(np.max(values.max(axis=1) - values.min(axis=1)) / peak)
