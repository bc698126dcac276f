import math

import pytest

from hhilab.config import (
    CHECK_NAMES,
    DEFAULT_TOLERANCES,
    ScenarioConfig,
    config_from_dict,
    parse_config,
    parse_config_text,
)
from hhilab.errors import ConfigError

MINIMAL = """
[model]
kappa = 1.0
L = 10.0
N = 400
mass = 1.0

[run]
beta = "hawking"

[checks]
list = ["prop62"]
"""


def test_minimal_config_is_valid():
    cfg = parse_config_text(MINIMAL)
    assert cfg.model.N == 400 and cfg.model.kappa == 1.0
    assert cfg.checks == ("prop62",)
    assert cfg.resolve_beta() == pytest.approx(2 * math.pi)


def test_empty_document_gives_defaults():
    cfg = parse_config_text("")
    assert cfg == ScenarioConfig() or cfg.to_dict() == ScenarioConfig().to_dict()
    assert cfg.checks == CHECK_NAMES
    assert cfg.tolerances == DEFAULT_TOLERANCES


def test_negative_beta_names_key():
    with pytest.raises(ConfigError) as exc:
        parse_config_text("[run]\nbeta = -1\n")
    assert [k for k, _ in exc.value.violations] == ["run.beta"]


def test_unknown_key_gets_suggestion():
    with pytest.raises(ConfigError) as exc:
        parse_config_text("modle.kappa = 1.0\n")
    key, msg = exc.value.violations[0]
    assert key == "modle.kappa"
    assert "'model.kappa'" in msg


def test_misspelled_key_inside_section():
    with pytest.raises(ConfigError) as exc:
        parse_config_text("[run]\nN_tua = 64\n")
    assert "run.N_tau" in str(exc.value)


def test_all_violations_are_reported():
    text = """
[model]
kappa = 0
N = 3
lapse = "cosh"

[run]
N_tau = 7
green_route = "spectral"
probe_margins = [0.8, 0.2]

[checks]
list = ["prop62", "prop99"]

[tolerances]
jump = -1.0

[output]
format = "xml"
"""
    with pytest.raises(ConfigError) as exc:
        parse_config_text(text)
    keys = {k for k, _ in exc.value.violations}
    assert keys == {
        "model.kappa", "model.N", "model.lapse", "run.N_tau", "run.green_route",
        "run.probe_margins", "checks.list", "tolerances.jump", "output.format",
    }


def test_syntax_error_has_line_number():
    with pytest.raises(ConfigError) as exc:
        parse_config_text("[model]\nkappa = 1.0\nL = = 3\n")
    assert exc.value.line == 3
    assert str(exc.value).startswith("line 3")


def test_empty_checks_rejected():
    with pytest.raises(ConfigError):
        parse_config_text("[checks]\nlist = []\n")


def test_repeated_checks_rejected():
    with pytest.raises(ConfigError, match="repeat"):
        parse_config_text('[checks]\nlist = ["prop62", "prop62"]\n')


def test_numeric_beta_and_state_betas():
    cfg = config_from_dict({"run": {"beta": 3, "state_betas": [1, "hawking"]}})
    assert cfg.resolve_beta() == 3.0
    assert cfg.resolve_beta(cfg.run.state_betas[1]) == pytest.approx(2 * math.pi)


def test_tolerance_override():
    cfg = parse_config_text("[tolerances]\nprop62_green = 1e-3\n")
    assert cfg.tolerances["prop62_green"] == 1e-3
    assert cfg.tolerances["jump"] == DEFAULT_TOLERANCES["jump"]


def test_boolean_is_not_a_number():
    with pytest.raises(ConfigError):
        parse_config_text("[model]\nN = true\n")


def test_parse_config_reads_file(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text(MINIMAL)
    assert parse_config(p).checks == ("prop62",)
    with pytest.raises(ConfigError, match="cannot read"):
        parse_config(tmp_path / "missing.toml")


def test_config_echo_roundtrip():
    cfg = parse_config_text(MINIMAL)
    echo = cfg.to_dict()
    echo["checks"] = {"list": echo["checks"]}
    again = config_from_dict(echo)
    assert again.to_dict() == cfg.to_dict()
