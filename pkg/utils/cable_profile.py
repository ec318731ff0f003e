"""
Equilibrium shape of a sustaining cable.

The profile solves H0 s'' = (load_mass + m sqrt(1 + s'^2)) g with
s(0) = s(L) = s0. Solutions started at midspan with zero slope differ only by
a constant, so one trial integration plus a shift hits the boundary value.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np
import pandas as pd
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from utils.errors import NumericalError, ParameterError
from utils.numerics_core import (
    DEFAULT_IVP_STEPS,
    DEFAULT_PANEL_COUNT,
    DEFAULT_POINTS_PER_PANEL,
    Grid,
    integrate,
    make_grid,
    solve_ivp_2nd_order,
)

logger = logging.getLogger(__name__)

DEFAULT_TOLERANCE = 1e-9
# Gap between parabola and catenary quoted for a 1 km span, as a fraction of L
QUOTED_GAP_FRACTION = 6e-3
QUOTED_GAP_SLACK = 0.2
PROFILE_COLUMNS = ["x", "s", "s_prime", "s_second", "xi"]


@dataclass(frozen=True)
class CableParams:
    """Physical data of one cable and the deck load it carries."""
    H0: float
    m: float
    load_mass: float
    g: float = 9.81
    L: float = math.pi
    s0: float = 1.0

    def __post_init__(self):
        for name in ("H0", "g", "L", "s0"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ParameterError(f"cable {name} must be > 0, got {value!r}")
        for name in ("m", "load_mass"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ParameterError(f"cable {name} must be >= 0, got {value!r}")
        if self.m == 0 and self.load_mass == 0:
            raise ParameterError("cable m and load_mass cannot both be zero")

    def acceleration(self, slope):
        """Right-hand side of the equilibrium ODE for a given slope."""
        return (self.load_mass + self.m * np.sqrt(1.0 + slope * slope)) * self.g / self.H0


@dataclass(frozen=True, eq=False)
class CableProfile:
    """Equilibrium profile sampled on a quadrature grid."""
    params: CableParams
    grid: Grid
    s: np.ndarray
    s_prime: np.ndarray
    s_second: np.ndarray
    xi: np.ndarray
    L_c: float
    apex_value: float
    shoot_residual: float
    _value_spline: CubicHermiteSpline = field(repr=False)
    _slope_spline: CubicHermiteSpline = field(repr=False)

    def _mirror(self, x):
        x = np.asarray(x, dtype=float)
        L = self.params.L
        if np.any(x < 0.0) or np.any(x > L):
            raise ParameterError(f"abscissa outside [0, {L:g}]")
        right = x >= 0.5 * L
        return np.where(right, x, L - x), np.where(right, 1.0, -1.0)

    def value_at(self, x):
        """s(x) anywhere in [0, L]."""
        xm, _ = self._mirror(x)
        return self._value_spline(xm)

    def slope_at(self, x):
        """s'(x) anywhere in [0, L]; odd about midspan."""
        xm, sign = self._mirror(x)
        return sign * self._slope_spline(xm)

    def xi_at(self, x):
        """Local length sqrt(1 + s'^2) anywhere in [0, L]."""
        slope = self.slope_at(x)
        return np.sqrt(1.0 + slope * slope)


def solve_cable(params: CableParams, tolerance: float = DEFAULT_TOLERANCE,
                grid: Optional[Grid] = None,
                step_count: int = DEFAULT_IVP_STEPS) -> CableProfile:
    """Solve the cable equilibrium problem by a single affine shooting correction.

    The half-span (L/2, L) is integrated from the apex with s'(L/2) = 0; the
    other half is its mirror image, so the discrete profile is exactly symmetric.
    The shift makes s(0) = s0 exact, so shoot_residual is the boundary miss of
    the same shift applied to a half-resolution integration: an estimate of the
    IVP error that the tolerance bounds.
    """
    if not tolerance > 0:
        raise ParameterError(f"tolerance must be > 0, got {tolerance!r}")
    if int(step_count) != step_count or step_count < 2:
        raise ParameterError(f"step_count must be an integer >= 2, got {step_count!r}")
    L = params.L
    if grid is None:
        grid = make_grid(L, DEFAULT_PANEL_COUNT, DEFAULT_POINTS_PER_PANEL)
    elif grid.domain_length != L:
        raise ParameterError(
            f"grid spans (0, {grid.domain_length:g}) but cable span is {L:g}"
        )

    load, m, g, H0 = params.load_mass, params.m, params.g, params.H0

    def accel(_x, _s, slope):
        return (load + m * math.sqrt(1.0 + slope * slope)) * g / H0

    trial = solve_ivp_2nd_order(accel, 0.5 * L, 0.0, 0.0, L, step_count)
    apex = params.s0 - trial.s[-1]
    s_half = trial.s + apex
    dds_half = params.acceleration(trial.ds)

    value_spline = CubicHermiteSpline(trial.x, s_half, trial.ds)
    slope_spline = CubicHermiteSpline(trial.x, trial.ds, dds_half)

    right = grid.nodes >= 0.5 * L
    mirrored = np.where(right, grid.nodes, L - grid.nodes)
    sign = np.where(right, 1.0, -1.0)
    s = value_spline(mirrored)
    s_prime = sign * slope_spline(mirrored)
    xi = np.sqrt(1.0 + s_prime * s_prime)
    s_second = (load + m * xi) * g / H0

    coarse = solve_ivp_2nd_order(accel, 0.5 * L, 0.0, 0.0, L, step_count // 2)
    residual = abs(float(coarse.s[-1] + apex) - params.s0)
    if residual > tolerance:
        raise NumericalError(
            f"shooting residual {residual:.3e} exceeds tolerance {tolerance:.3e}"
        )

    for array in (s, s_prime, s_second, xi):
        array.setflags(write=False)

    profile = CableProfile(
        params=params,
        grid=grid,
        s=s,
        s_prime=s_prime,
        s_second=s_second,
        xi=xi,
        L_c=integrate(grid, xi),
        apex_value=float(apex),
        shoot_residual=residual,
        _value_spline=value_spline,
        _slope_spline=slope_spline,
    )
    logger.debug(
        "Cable solved: apex=%.12g L_c=%.12g residual=%.3e", profile.apex_value,
        profile.L_c, residual,
    )
    return profile


def parabola_reference(params: CableParams) -> Callable:
    """Closed-form profile of a massless cable carrying a uniform deck."""
    if params.m != 0:
        raise ParameterError("parabola reference requires m = 0")
    c = params.load_mass * params.g / (2.0 * params.H0)

    def s_p(x):
        x = np.asarray(x, dtype=float)
        return params.s0 - c * x * (params.L - x)

    return s_p


def catenary_reference(params: CableParams) -> Callable:
    """Closed-form profile of a cable loaded only by its own weight."""
    if params.load_mass != 0:
        raise ParameterError("catenary reference requires load_mass = 0")
    alpha = params.m * params.g / params.H0
    L = params.L

    def s_c(x):
        x = np.asarray(x, dtype=float)
        return (np.cosh(0.5 * alpha * (2.0 * x - L)) - math.cosh(0.5 * alpha * L)) / alpha + params.s0

    return s_c


def _same_sag_catenary_parameter(L: float, sag: float) -> float:
    """Solve a (cosh(L/2a) - 1) = sag for the catenary length scale a."""
    def excess(a):
        return a * math.expm1(0.5 * L / a) * 0.5 + a * math.expm1(-0.5 * L / a) * 0.5 - sag

    return brentq(excess, L / 1400.0, L * L / (4.0 * sag), xtol=1e-14 * L, rtol=1e-15)


def shape_ordering_diagnostic(profile: CableProfile) -> Dict[str, object]:
    """Compare the profile with the parabola and catenary of equal apex sag.

    Logged only; the ordering is an observation, not a guarantee.
    """
    p = profile.params
    x = profile.grid.nodes
    sag = p.s0 - profile.apex_value
    parabola = p.s0 - 4.0 * sag * x * (p.L - x) / (p.L * p.L)
    a = _same_sag_catenary_parameter(p.L, sag)
    catenary = p.s0 - sag + a * (np.cosh((x - 0.5 * p.L) / a) - 1.0)

    slack = 1e-12 * p.s0
    lower = np.minimum(parabola, catenary) - slack
    upper = np.maximum(parabola, catenary) + slack
    between = bool(np.all((profile.s >= lower) & (profile.s <= upper)))
    report = {
        "sag": float(sag),
        "between_parabola_and_catenary": between,
        "max_parabola_gap": float(np.max(np.abs(profile.s - parabola))),
        "max_catenary_gap": float(np.max(np.abs(profile.s - catenary))),
    }
    if between:
        logger.info("Profile lies between the equal-sag parabola and catenary")
    else:
        logger.warning("Profile leaves the band between the equal-sag parabola and catenary")
    return report


@dataclass(frozen=True)
class SagReading:
    """Parabola/catenary comparison for one value of the parabola constant gM/2H0."""
    name: str
    constant: float
    midspan_gap: float
    max_abs_gap: float
    matched_sag_max_gap: float
    reproduces_quoted_gap: bool


@dataclass(frozen=True)
class SagComparison:
    L: float
    sag_ratio: float
    readings: List[SagReading]
    confirmed_reading: Optional[str]

    def as_dict(self) -> Dict[str, object]:
        return {
            "L": self.L,
            "sag_ratio": self.sag_ratio,
            "confirmed_reading": self.confirmed_reading,
            "readings": [reading.__dict__.copy() for reading in self.readings],
        }


def _compare_reading(name: str, constant: float, L: float) -> SagReading:
    x = np.linspace(0.0, L, 2001)
    parabola = -constant * x * (L - x)

    # load-matched catenary: m g L_c = M g L with the same H0
    alpha = 2.0 * math.asinh(constant * L) / L
    catenary = (np.cosh(0.5 * alpha * (2.0 * x - L)) - math.cosh(0.5 * alpha * L)) / alpha
    gap = parabola - catenary

    sag = constant * L * L / 4.0
    a = _same_sag_catenary_parameter(L, sag)
    same_sag = -sag + a * (np.cosh((x - 0.5 * L) / a) - 1.0)

    midspan = float(gap[x.size // 2])
    target = QUOTED_GAP_FRACTION * L
    return SagReading(
        name=name,
        constant=float(constant),
        midspan_gap=midspan,
        max_abs_gap=float(np.max(np.abs(gap))),
        matched_sag_max_gap=float(np.max(np.abs(parabola - same_sag))),
        reproduces_quoted_gap=bool(
            (1.0 - QUOTED_GAP_SLACK) * target <= abs(midspan) <= (1.0 + QUOTED_GAP_SLACK) * target
        ),
    )


def compare_sag_conventions(L: float, sag_ratio: float) -> SagComparison:
    """Midspan parabola-catenary gap under both readings of the parabola constant.

    "stated" uses gM/2H0 = 2/(3L); "implied" uses the value 4 sag_ratio / L
    that the parabola formula gives for the requested sag ratio.
    """
    if not (L > 0 and math.isfinite(L)):
        raise ParameterError(f"L must be > 0, got {L!r}")
    if not 0 < sag_ratio < 0.5:
        raise ParameterError(f"sag_ratio must lie in (0, 1/2), got {sag_ratio!r}")

    readings = [
        _compare_reading("stated", 2.0 / (3.0 * L), L),
        _compare_reading("implied", 4.0 * sag_ratio / L, L),
    ]
    matching = [r for r in readings if r.reproduces_quoted_gap]
    confirmed = None
    if matching:
        target = QUOTED_GAP_FRACTION * L
        confirmed = min(matching, key=lambda r: abs(abs(r.midspan_gap) - target)).name

    for reading in readings:
        logger.info(
            "Sag reading %-8s constant=%.6g midspan gap=%.6g (%.3e L)%s",
            reading.name, reading.constant, reading.midspan_gap,
            reading.midspan_gap / L, "  <- matches quoted gap" if reading.reproduces_quoted_gap else "",
        )
    return SagComparison(L=float(L), sag_ratio=float(sag_ratio), readings=readings,
                         confirmed_reading=confirmed)


def cable_tension_at_rest(profile: CableProfile, x: float) -> float:
    """Tension H0 xi(x), xi interpolated linearly between grid nodes."""
    L = profile.params.L
    if not 0.0 <= x <= L:
        raise ParameterError(f"x must lie in [0, {L:g}], got {x!r}")
    end_xi = float(profile.xi_at(L))
    abscissae = np.concatenate(([0.0], profile.grid.nodes, [L]))
    values = np.concatenate(([end_xi], profile.xi, [end_xi]))
    return profile.params.H0 * float(np.interp(x, abscissae, values))


def profile_table(profile: CableProfile) -> pd.DataFrame:
    """CSV-ready table of the sampled profile."""
    return pd.DataFrame(
        {
            "x": profile.grid.nodes,
            "s": profile.s,
            "s_prime": profile.s_prime,
            "s_second": profile.s_second,
            "xi": profile.xi,
        },
        columns=PROFILE_COLUMNS,
    )
