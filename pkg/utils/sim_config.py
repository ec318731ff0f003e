"""
Run configuration: dotted `section.key = value` documents.

Values are decoded as TOML values (numbers, booleans, quoted strings, arrays);
bare words such as `longitudinal` or `auto` are read as strings. Every key has
a default, so an empty document is a complete configuration.
"""

import hashlib
import json
import logging
import math
import os
import re
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, Optional, Tuple

import toml
from dotenv import load_dotenv

from utils.bridge_dynamics import BridgeParams
from utils.cable_profile import DEFAULT_TOLERANCE
from utils.errors import ConfigSyntaxError, ParameterError
from utils.numerics_core import (
    DEFAULT_FD_POINTS,
    DEFAULT_IVP_STEPS,
    DEFAULT_PANEL_COUNT,
    DEFAULT_POINTS_PER_PANEL,
    SUPPORTED_POINTS_PER_PANEL,
)
from utils.scenarios import DEFAULT_SCENARIO, DEFAULT_TORSION_SEED, SCENARIOS
from utils.time_integration import IntegratorConfig, PicardConfig
from utils.weighted_spectral import FD_POINTS_PER_MODE

load_dotenv()

logger = logging.getLogger(__name__)

DEFAULTS_VERSION = "1"
OUTPUT_FORMATS = ("csv", "json")
CONFIG_PATH = os.getenv("BRIDGESIM_CONFIG")

LINE_PATTERN = re.compile(r"^\s*([A-Za-z_]\w*)\.([A-Za-z_]\w*)\s*=\s*(.*?)\s*$")
BARE_WORD = re.compile(r"[A-Za-z_][\w.\-/]*")


def _positive(section: str, name: str, value) -> None:
    if isinstance(value, bool) or not (math.isfinite(value) and value > 0):
        raise ParameterError(f"{section}.{name} must be > 0, got {value!r}")


@dataclass(frozen=True)
class CableSection:
    s0: float = 1.0
    span: float = math.pi
    tolerance: float = DEFAULT_TOLERANCE
    ivp_steps: int = DEFAULT_IVP_STEPS

    def __post_init__(self):
        for name in ("s0", "span", "tolerance"):
            _positive("cable", name, getattr(self, name))
        if self.ivp_steps < 2:
            raise ParameterError(f"cable.ivp_steps must be >= 2, got {self.ivp_steps!r}")


@dataclass(frozen=True)
class GridSection:
    panel_count: int = DEFAULT_PANEL_COUNT
    points_per_panel: int = DEFAULT_POINTS_PER_PANEL
    fd_points: int = DEFAULT_FD_POINTS

    def __post_init__(self):
        if self.panel_count < 1:
            raise ParameterError(f"grid.panel_count must be >= 1, got {self.panel_count!r}")
        if self.points_per_panel not in SUPPORTED_POINTS_PER_PANEL:
            raise ParameterError(
                f"grid.points_per_panel must be one of {SUPPORTED_POINTS_PER_PANEL}, "
                f"got {self.points_per_panel!r}"
            )
        if self.fd_points < 1:
            raise ParameterError(f"grid.fd_points must be >= 1, got {self.fd_points!r}")


@dataclass(frozen=True)
class InitialSection:
    scenario: str = DEFAULT_SCENARIO
    # None reads as "auto": the preset's own amplitude
    amplitude: Optional[float] = None
    torsion_seed: float = DEFAULT_TORSION_SEED

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise ParameterError(f"initial.scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        if self.amplitude is not None and not (math.isfinite(self.amplitude) and self.amplitude >= 0):
            raise ParameterError(f"initial.amplitude must be >= 0 or auto, got {self.amplitude!r}")
        if not math.isfinite(self.torsion_seed):
            raise ParameterError(f"initial.torsion_seed must be finite, got {self.torsion_seed!r}")


@dataclass(frozen=True)
class CompareSection:
    sag_span: float = 1000.0
    sag_ratio: float = 1.0 / 12.0
    p_amplitude: float = 0.01

    def __post_init__(self):
        _positive("compare", "sag_span", self.sag_span)
        _positive("compare", "p_amplitude", self.p_amplitude)
        if not 0 < self.sag_ratio < 0.5:
            raise ParameterError(f"compare.sag_ratio must lie in (0, 0.5), got {self.sag_ratio!r}")


@dataclass(frozen=True)
class OutputSection:
    directory: str = "out"
    formats: Tuple[str, ...] = OUTPUT_FORMATS

    def __post_init__(self):
        if not self.directory:
            raise ParameterError("output.directory must not be empty")
        unknown = [name for name in self.formats if name not in OUTPUT_FORMATS]
        if unknown:
            raise ParameterError(f"output.formats must be drawn from {OUTPUT_FORMATS}, got {unknown}")


@dataclass(frozen=True)
class DebugSection:
    xi_one: bool = False
    printed_exponents: bool = False


@dataclass(frozen=True)
class SimulationConfig:
    cable: CableSection = field(default_factory=CableSection)
    bridge: BridgeParams = field(default_factory=BridgeParams)
    grid: GridSection = field(default_factory=GridSection)
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    picard: PicardConfig = field(default_factory=PicardConfig)
    initial: InitialSection = field(default_factory=InitialSection)
    compare: CompareSection = field(default_factory=CompareSection)
    output: OutputSection = field(default_factory=OutputSection)
    debug: DebugSection = field(default_factory=DebugSection)

    def __post_init__(self):
        minimum = FD_POINTS_PER_MODE * self.bridge.n_modes
        if self.grid.fd_points < minimum:
            raise ParameterError(
                f"grid.fd_points must be >= {FD_POINTS_PER_MODE} * bridge.n_modes = {minimum}, "
                f"got {self.grid.fd_points}"
            )
        if self.bridge.printed_exponents != self.debug.printed_exponents:
            raise ParameterError("debug.printed_exponents and bridge parameters disagree")
        if self.initial.scenario == "torsional-perturbed" and self.bridge.mode_flag == "single_beam":
            raise ParameterError("initial.scenario torsional-perturbed needs two cables; "
                                 "bridge.mode_flag is single_beam")


SECTIONS = {f.name: f.default_factory for f in fields(SimulationConfig)}
# bridge.printed_exponents is set through debug.printed_exponents
HIDDEN_KEYS = {("bridge", "printed_exponents")}


def _section_defaults(name: str) -> Dict[str, Any]:
    instance = SECTIONS[name]()
    return {
        f.name: getattr(instance, f.name)
        for f in fields(instance)
        if (name, f.name) not in HIDDEN_KEYS
    }


def _decode(raw: str, line_number: int):
    try:
        return toml.loads(f"value = {raw}")["value"]
    except (toml.TomlDecodeError, IndexError, ValueError):
        bare = raw.split("#", 1)[0].strip()
        if BARE_WORD.fullmatch(bare):
            return bare
        raise ConfigSyntaxError(f"cannot read value {raw!r}", line_number)


def _coerce(section: str, key: str, value, default):
    label = f"{section}.{key}"
    if section == "initial" and key == "amplitude":
        if value == "auto":
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParameterError(f"{label} must be a number or auto, got {value!r}")
        return float(value)
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ParameterError(f"{label} must be true or false, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ParameterError(f"{label} must be an integer, got {value!r}")
        return value
    if isinstance(default, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParameterError(f"{label} must be a number, got {value!r}")
        return float(value)
    if isinstance(default, tuple):
        if not isinstance(value, list) or not all(isinstance(item, str) for item in value):
            raise ParameterError(f"{label} must be an array of strings, got {value!r}")
        return tuple(value)
    if not isinstance(value, str):
        raise ParameterError(f"{label} must be a string, got {value!r}")
    return value


def parse_config(text: str) -> SimulationConfig:
    """Parse and validate a configuration document; missing keys take defaults."""
    values: Dict[str, Dict[str, Any]] = {name: {} for name in SECTIONS}
    for line_number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        match = LINE_PATTERN.match(line)
        if match is None:
            raise ConfigSyntaxError(f"expected 'section.key = value', got {stripped!r}", line_number)
        section, key, raw = match.groups()
        if section not in SECTIONS:
            raise ConfigSyntaxError(f"unknown section {section!r}", line_number)
        defaults = _section_defaults(section)
        if key not in defaults:
            raise ConfigSyntaxError(f"unknown key {section}.{key}", line_number)
        if key in values[section]:
            raise ConfigSyntaxError(f"duplicate key {section}.{key}", line_number)
        if not raw:
            raise ConfigSyntaxError(f"missing value for {section}.{key}", line_number)
        values[section][key] = _coerce(section, key, _decode(raw, line_number), defaults[key])

    debug = DebugSection(**values["debug"])
    sections = {
        name: SECTIONS[name](**values[name])
        for name in SECTIONS
        if name not in ("bridge", "debug")
    }
    bridge = BridgeParams(**values["bridge"], printed_exponents=debug.printed_exponents)
    return SimulationConfig(bridge=bridge, debug=debug, **sections)


def _format_value(value) -> str:
    if value is None:
        return "auto"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, float)):
        return repr(value)
    if isinstance(value, tuple):
        return "[" + ", ".join(json.dumps(item) for item in value) + "]"
    if BARE_WORD.fullmatch(value) and value not in ("true", "false", "auto"):
        return value
    return json.dumps(value)


def emit_config(config: SimulationConfig) -> str:
    """Canonical document listing every key; parse_config reads it back unchanged."""
    lines = [f"# bridgesim configuration (defaults version {DEFAULTS_VERSION})"]
    for name in SECTIONS:
        section = getattr(config, name)
        lines.append("")
        for f in fields(section):
            if (name, f.name) in HIDDEN_KEYS:
                continue
            lines.append(f"{name}.{f.name} = {_format_value(getattr(section, f.name))}")
    return "\n".join(lines) + "\n"


def config_hash(config: SimulationConfig) -> str:
    return hashlib.sha256(emit_config(config).encode("utf-8")).hexdigest()


def load_config(path: Optional[str] = None) -> SimulationConfig:
    """Read a configuration file; BRIDGESIM_CONFIG is used when no path is given."""
    path = path or CONFIG_PATH
    if not path:
        logger.info("No configuration file given; using defaults")
        return SimulationConfig()
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ParameterError(f"cannot read configuration {path}: {e}") from e
    logger.info("Loaded configuration from %s", path)
    return parse_config(text)


def with_debug_flags(config: SimulationConfig, xi_one: bool = False,
                     printed_exponents: bool = False) -> SimulationConfig:
    """Switch on debug hooks requested outside the document (command-line flags)."""
    debug = replace(
        config.debug,
        xi_one=config.debug.xi_one or xi_one,
        printed_exponents=config.debug.printed_exponents or printed_exponents,
    )
    bridge = replace(config.bridge, printed_exponents=debug.printed_exponents)
    return replace(config, debug=debug, bridge=bridge)
