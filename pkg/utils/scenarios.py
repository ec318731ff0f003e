"""
Named initial-data presets.

Amplitudes are expressed relative to the hanger slack threshold W/kappa(x) of
the assembled system, so a preset keeps its character under any parameters.
"""

import logging
import math
from typing import Dict, Optional

import numpy as np

from utils.bridge_dynamics import BridgeSystem, ModalState
from utils.errors import ParameterError
from utils.weighted_spectral import SINE_NORM

logger = logging.getLogger(__name__)

SCENARIOS = ("equilibrium", "longitudinal", "torsional-perturbed", "slackening")
DEFAULT_SCENARIO = "longitudinal"
# amplitude used when the configuration says "auto"
DEFAULT_AMPLITUDES: Dict[str, float] = {
    "equilibrium": 0.0,
    "longitudinal": 0.25,
    "torsional-perturbed": 4.0,
    "slackening": 4.0,
}
DEFAULT_TORSION_SEED = 1e-4


def slack_scales(system: BridgeSystem) -> Dict[str, float]:
    """Smallest and largest hanger elongation that makes a hanger slack."""
    depth = system.law.W / system.law.kappa
    return {"min": float(np.min(depth)), "max": float(np.max(depth))}


def scenario_state(name: str, system: BridgeSystem, amplitude: Optional[float] = None,
                   torsion_seed: float = DEFAULT_TORSION_SEED) -> ModalState:
    """Initial modal state of a preset.

    longitudinal: deck mode-1 velocity amplitude * tau_min * sqrt(EI/M), where
    tau_min is the smallest slack depth; with amplitude below one the hangers
    stay taut. slackening: deck mode-1 displacement whose peak is amplitude *
    tau_max. torsional-perturbed: slackening plus theta = torsion_seed * e_1.
    """
    if name not in SCENARIOS:
        raise ParameterError(f"initial.scenario must be one of {SCENARIOS}, got {name!r}")
    if amplitude is None:
        amplitude = DEFAULT_AMPLITUDES[name]
    if not (math.isfinite(amplitude) and amplitude >= 0):
        raise ParameterError(f"initial.amplitude must be >= 0, got {amplitude!r}")

    n = system.n_modes
    state = ModalState.zeros(n)
    if name == "equilibrium":
        return state

    scales = slack_scales(system)
    params = system.params
    y = np.zeros(n)
    dy = np.zeros(n)
    theta = np.zeros(n)
    if name == "longitudinal":
        dy[0] = amplitude * scales["min"] * math.sqrt(params.EI / params.M)
    else:
        y[0] = amplitude * scales["max"] / SINE_NORM
        if name == "torsional-perturbed":
            if system.rows == 1:
                raise ParameterError("torsional-perturbed needs the two-cable bridge")
            theta[0] = torsion_seed

    zero = np.zeros(n)
    logger.debug("Scenario %s: amplitude=%g slack depth min=%.4g max=%.4g",
                 name, amplitude, scales["min"], scales["max"])
    return ModalState(0.0, zero, zero, y, theta, zero, zero, dy, zero)
