import math

import pytest

from utils.errors import ConfigSyntaxError, ParameterError
from utils.sim_config import (
    SimulationConfig,
    config_hash,
    emit_config,
    load_config,
    parse_config,
    with_debug_flags,
)

CUSTOM = """
# longer run with the dissipative integrator
integrator.method = rk4
integrator.dt = 5e-4
initial.scenario = torsional-perturbed
initial.amplitude = 2.5
bridge.n_modes = 8
bridge.kappa0 = 1500
output.formats = ["csv"]
debug.printed_exponents = true
"""


class TestParse:

    def test_empty_document_gives_defaults(self):
        assert parse_config("") == SimulationConfig()
        assert parse_config("# nothing here\n\n") == SimulationConfig()

    def test_values_are_typed(self):
        config = parse_config(CUSTOM)
        assert config.integrator.method == "rk4"
        assert config.integrator.dt == 5e-4
        assert config.initial.scenario == "torsional-perturbed"
        assert config.initial.amplitude == 2.5
        assert config.bridge.n_modes == 8
        assert config.bridge.kappa0 == 1500.0
        assert isinstance(config.bridge.kappa0, float)
        assert config.output.formats == ("csv",)
        assert config.bridge.printed_exponents

    def test_trailing_comments_and_quoted_strings(self):
        config = parse_config('integrator.dt = 0.002  # finer\ninitial.scenario = "slackening"\n')
        assert config.integrator.dt == 0.002
        assert config.initial.scenario == "slackening"

    def test_auto_amplitude(self):
        assert parse_config("initial.amplitude = auto").initial.amplitude is None

    def test_validation_names_the_key(self):
        with pytest.raises(ParameterError, match="bridge.n_modes"):
            parse_config("bridge.n_modes = 0")

    @pytest.mark.parametrize("text, line", [
        ("integrator.dt = 0.001\nintegrator.step = 0.1", 2),
        ("\nsolver.dt = 0.1", 2),
        ("integrator dt 0.1", 1),
        ("integrator.dt = 0.1\nintegrator.dt = 0.2", 2),
        ("integrator.dt =", 1),
        ("integrator.method = [rk4", 1),
    ])
    def test_syntax_errors_carry_the_line(self, text, line):
        with pytest.raises(ConfigSyntaxError) as info:
            parse_config(text)
        assert info.value.line_number == line
        assert str(info.value).startswith(f"line {line}:")

    @pytest.mark.parametrize("text, key", [
        ("debug.xi_one = 1", "debug.xi_one"),
        ("bridge.n_modes = 4.5", "bridge.n_modes"),
        ("integrator.dt = fast", "integrator.dt"),
        ("initial.amplitude = true", "initial.amplitude"),
        ("output.formats = csv", "output.formats"),
    ])
    def test_type_errors(self, text, key):
        with pytest.raises(ParameterError, match=key):
            parse_config(text)

    def test_fd_points_must_resolve_the_modes(self):
        with pytest.raises(ParameterError, match="grid.fd_points"):
            parse_config("bridge.n_modes = 32\ngrid.fd_points = 256")

    def test_torsion_needs_two_cables(self):
        with pytest.raises(ParameterError, match="torsional-perturbed"):
            parse_config("bridge.mode_flag = single_beam\ninitial.scenario = torsional-perturbed")


class TestEmit:

    def test_defaults_read_back(self):
        config = SimulationConfig()
        assert parse_config(emit_config(config)) == config

    def test_custom_values_read_back(self):
        config = parse_config(CUSTOM)
        text = emit_config(config)
        assert parse_config(text) == config
        assert "initial.amplitude = 2.5" in text
        assert "bridge.printed_exponents" not in text
        assert f"cable.span = {math.pi!r}" in text

    def test_hash_follows_content(self):
        assert config_hash(SimulationConfig()) == config_hash(parse_config(""))
        assert config_hash(parse_config(CUSTOM)) != config_hash(SimulationConfig())
        assert len(config_hash(SimulationConfig())) == 64


def test_debug_flags_from_the_command_line():
    config = with_debug_flags(SimulationConfig(), xi_one=True, printed_exponents=True)
    assert config.debug.xi_one and config.debug.printed_exponents
    assert config.bridge.printed_exponents
    assert with_debug_flags(config) == config


class TestLoad:

    def test_reads_a_file(self, tmp_path):
        path = tmp_path / "run.conf"
        path.write_text(CUSTOM, encoding="utf-8")
        assert load_config(str(path)) == parse_config(CUSTOM)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParameterError, match="cannot read"):
            load_config(str(tmp_path / "absent.conf"))
