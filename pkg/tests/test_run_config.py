import json

import pytest

from src.exceptions import ConfigError
from src.run_config import (
    COMMAND_CONFIGS,
    THREADS_ENV,
    DefinettiGapConfig,
    LogGasRunConfig,
    default_threads,
    load_config,
    parse_config,
)


def test_defaults_are_filled():
    config = parse_config("definetti-gap", {"d": 2, "N": [1, 2]})
    assert isinstance(config, DefinettiGapConfig)
    assert config.d == [2]
    assert config.n == [1]
    assert config.seeds == [0]
    assert config.rank is None
    assert config.seed == 0
    assert config.to_dict()["N"] == [1, 2]


def test_list_defaults_are_not_shared():
    first = parse_config("definetti-gap", {"d": 2, "N": 2})
    first.seeds.append(5)
    assert parse_config("definetti-gap", {"d": 2, "N": 2}).seeds == [0]


def test_unknown_keys_are_listed():
    with pytest.raises(ConfigError, match="bogus"):
        parse_config("definetti-gap", {"d": 2, "N": 2, "bogus": 1})


def test_missing_keys_are_named():
    with pytest.raises(ConfigError, match="'N'"):
        parse_config("definetti-gap", {"d": 2})


def test_out_of_range_value_names_the_field():
    with pytest.raises(ConfigError, match="Invalid configuration field 'N'"):
        parse_config("definetti-gap", {"d": 2, "N": -1})


@pytest.mark.parametrize(
    "payload",
    [
        {"N": [4], "beta": 0.0},
        {"N": [4], "beta": "two"},
        {"N": [4], "beta": 1.0, "steps": 10},
        {"N": [4], "beta": 1.0, "grid": 32},
        {"N": [4], "beta": 1.0, "interaction": 1},
        {"N": [2.5], "beta": 1.0},
        {"N": [], "beta": 1.0},
    ],
)
def test_loggas_validation(payload):
    with pytest.raises(ConfigError):
        parse_config("loggas", payload)


def test_loggas_coercion():
    config = parse_config("loggas", {"N": 4, "beta": 2, "beta_grid": [0.5, 1]})
    assert isinstance(config, LogGasRunConfig)
    assert config.N == [4]
    assert config.beta == 2.0
    assert config.beta_grid == [0.5, 1.0]


def test_problem_choices():
    assert parse_config("hartree-sweep", {"N": [2, 3], "problem": "free"}).problem == "free"
    with pytest.raises(ConfigError, match="problem"):
        parse_config("gibbs-sweep", {"N": [2], "problem": "unknown"})
    with pytest.raises(ConfigError):
        parse_config("gibbs-sweep", {"N": [2], "samples": 10})


def test_unknown_command():
    with pytest.raises(ConfigError):
        parse_config("nonsense", {})
    assert set(COMMAND_CONFIGS) == {"definetti-gap", "df-classical", "hartree-sweep", "gibbs-sweep", "localize-check", "loggas"}


def test_threads_environment_override(monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "3")
    assert default_threads() == 3
    config = parse_config("localize-check", {"d": 2, "N": 2, "threads": 8})
    assert config.resolved_threads() == 3
    monkeypatch.setenv(THREADS_ENV, "zero")
    with pytest.raises(ConfigError):
        default_threads()
    monkeypatch.delenv(THREADS_ENV)
    assert config.resolved_threads() == 8
    assert default_threads() >= 1


def test_load_config(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps({"K": [2], "N": [3]}))
    config = load_config("df-classical", str(path))
    assert config.K == [2]
    assert config.concentration == 1.0
    broken = tmp_path / "broken.json"
    broken.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config("df-classical", str(broken))
    with pytest.raises(ConfigError):
        load_config("df-classical", str(tmp_path / "missing.json"))
