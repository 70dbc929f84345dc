"""Tests for configuration loading, merging and validation."""

import pytest
import yaml

from app.config import (DEFAULT_SEED, THREADS_ENV_VAR, AppConfig, dump_config, load_config,
                        resolve_thread_count)
from app.errors import ConfigError


def _config_file(tmp_path, data):
    path = tmp_path / "config.yaml"
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return str(path)


def test_defaults():
    config = load_config()
    assert config == AppConfig()
    assert config.seed == DEFAULT_SEED
    assert config.car.n_laws == 10
    assert config.experiment_binary.n_per_agent == 100_000


def test_partial_file(tmp_path):
    config = load_config(_config_file(tmp_path, {"car": {"dt": 0.005, "law_params": {"u_min": 30}}}))
    assert config.car.dt == 0.005
    assert config.car.law_params.u_min == 30.0
    assert isinstance(config.car.law_params.u_min, float)
    assert config.car.horizon_T == 4.0


def test_seed_spreads_to_sections(tmp_path):
    path = _config_file(tmp_path, {"seed": 5, "car": {"seed": 9}})
    config = load_config(path)
    assert config.seed == 5
    assert config.experiment_binary.seed == 5
    assert config.car.seed == 9

    forced = load_config(path, {"seed": 11})
    assert forced.experiment_binary.seed == forced.car.seed == 11


def test_dump_round_trip(tmp_path):
    config = load_config(overrides={"seed": 3, "binary": {"method": "nonparametric"}})
    path = tmp_path / "dumped.yaml"
    path.write_text(dump_config(config), encoding="utf-8")
    assert load_config(str(path)) == config


@pytest.mark.parametrize("data,key_path", [
    ({"car": {"speed": 1}}, "car.speed"),
    ({"car": {"dt": "fast"}}, "car.dt"),
    ({"experiment_binary": {"n_per_agent": 1.5}}, "experiment_binary.n_per_agent"),
    ({"binary": {"paper_literal_slope": "yes"}}, "binary.paper_literal_slope"),
    ({"binary": {"method": "magic"}}, "binary.method"),
    ({"experiment_binary": {"ratios": [1.0, -2.0]}}, "experiment_binary.ratios"),
    ({"experiment_binary": {"ratios": ["a", 2.0]}}, "experiment_binary.ratios"),
    ({"car": {"n_laws": 2, "law_params": {"speeds_at_origin": [True, 100.0]}}},
     "car.law_params.speeds_at_origin"),
    ({"experiment_binary": {"n_per_agent": 10}}, "experiment_binary.n_per_agent"),
    ({"car": {"n_laws": 2, "law_params": {"speeds_at_origin": [100.0]}}}, "car.law_params.speeds_at_origin"),
    ({"car": {"weight_method": "median"}}, "car.weight_method"),
    ({"threads": 0}, "threads"),
])
def test_invalid_values(tmp_path, data, key_path):
    with pytest.raises(ConfigError) as info:
        load_config(_config_file(tmp_path, data))
    assert info.value.key_path == key_path
    assert str(info.value).startswith(f"{key_path}: ")


def test_unreadable_file(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(str(tmp_path / "absent.yaml"))


def test_invalid_yaml(tmp_path):
    path = tmp_path / "config.yaml"
    path.write_text("car: [unclosed", encoding="utf-8")
    with pytest.raises(ConfigError, match="invalid YAML"):
        load_config(str(path))


class TestThreadCount:
    """Tests for worker thread resolution."""

    def test_explicit(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV_VAR, "3")
        assert resolve_thread_count(load_config(overrides={"threads": 2})) == 2

    def test_environment(self, monkeypatch):
        monkeypatch.setenv(THREADS_ENV_VAR, "3")
        assert resolve_thread_count(AppConfig()) == 3

    @pytest.mark.parametrize("value", ["many", "0"])
    def test_bad_environment(self, monkeypatch, value):
        monkeypatch.setenv(THREADS_ENV_VAR, value)
        with pytest.raises(ConfigError) as info:
            resolve_thread_count(AppConfig())
        assert info.value.key_path == THREADS_ENV_VAR

    def test_fallback(self, monkeypatch):
        monkeypatch.delenv(THREADS_ENV_VAR, raising=False)
        assert resolve_thread_count(AppConfig()) >= 1
