import math

import pytest

from mcm_sim.atomic_model import LevelState
from mcm_sim.config import (
    CONFIG_ENV,
    DEFAULT_PRESET,
    RunConfig,
    config_schema,
    load_config,
    load_document,
    parse_config,
    resolve_config_path,
    save_document,
)
from mcm_sim.errors import ConfigError


def test_default_preset_matches_model_defaults(config):
    assert config == RunConfig()
    assert config.physics.si("bias_field") == pytest.approx(1.02e-3)
    assert config.sequence.echoes == 8
    assert config.sequence.repumps == 46


def test_default_preset_loads():
    document = load_document(DEFAULT_PRESET)
    parsed = parse_config(document)
    assert load_config() == parsed
    assert load_config(str(DEFAULT_PRESET)) == parsed
    assert set(parsed.calibration.rabi) == set(document["calibration"]["rabi"])
    negative = parsed.rabi(LevelState(3, -1), LevelState(4, -1))
    assert negative == pytest.approx(2 * math.pi * 58.4e3)
    assert parsed.rabi(LevelState(4, 0), LevelState(3, -1)) == pytest.approx(2 * math.pi * 44.8e3)


def test_round_trip_is_idempotent(config, tmp_path):
    path = save_document(tmp_path / "run.yaml", config.to_document())
    again = load_config(str(path))
    assert again == config
    assert again.to_json() == config.to_json()


def test_saved_document_keeps_key_order(config, tmp_path):
    path = save_document(tmp_path / "run.yaml", config.to_document())
    assert list(load_document(path)) == list(config.to_document())


def test_json_presets_are_accepted(config, tmp_path):
    path = tmp_path / "run.json"
    path.write_text(config.to_json(), encoding="utf-8")
    assert load_config(str(path)) == config


def test_unknown_key_reports_its_path():
    with pytest.raises(ConfigError) as info:
        parse_config({"physics": {"bogus": 1}})
    paths = [d["path"] for d in info.value.diagnostics]
    assert "physics.bogus" in paths
    assert info.value.exit_code == 2


def test_quantity_without_unit_is_rejected():
    with pytest.raises(ConfigError) as info:
        parse_config({"physics": {"bias_field": "10.2"}})
    assert info.value.diagnostics[0]["path"] == "physics.bias_field"


def test_even_array_size_is_rejected():
    with pytest.raises(ConfigError, match="odd"):
        parse_config({"sequence": {"array_size": 4}})


def test_bad_rabi_key_is_rejected():
    with pytest.raises(ConfigError):
        parse_config({"calibration": {"rabi": {"3,0->3,1": "10 kHz"}}})


def test_missing_file():
    with pytest.raises(ConfigError, match="does not exist"):
        load_config("/nonexistent/run.yaml")


def test_environment_variable_selects_the_preset(config, tmp_path, monkeypatch):
    path = save_document(tmp_path / "env.yaml", {"execution": {"seed": 7}})
    monkeypatch.setenv(CONFIG_ENV, str(path))
    assert resolve_config_path() == path
    assert load_config().execution.seed == 7
    assert resolve_config_path(str(DEFAULT_PRESET)) == DEFAULT_PRESET


def test_updated_validates_and_copies(config):
    changed = config.updated(sequence={"echoes": 4})
    assert changed.sequence.echoes == 4
    assert config.sequence.echoes == 8
    with pytest.raises(ConfigError):
        config.updated(sequence={"echoes": -1})


def test_rabi_lookup_is_order_independent(config):
    forward = config.rabi(LevelState(3, 0), LevelState(4, 0))
    backward = config.rabi(LevelState(4, 0), LevelState(3, 0))
    assert forward == backward == pytest.approx(2 * math.pi * 62.8e3)
    with pytest.raises(ConfigError):
        config.rabi(LevelState(3, -3), LevelState(4, -4))


def test_scatter_params_columns(config):
    mid = config.scatter_params()
    occ = config.scatter_params("occupation")
    assert mid.detuning == pytest.approx(-2 * mid.gamma)
    assert occ.saturation == 5.0
    with pytest.raises(ConfigError):
        config.scatter_params("side")


def test_schema_lists_every_block():
    schema = config_schema()
    assert set(schema["properties"]) == set(RunConfig.model_fields)
