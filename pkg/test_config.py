#!/usr/bin/env python3
"""
Configuration and Utility Tests - config layers, validators, artifacts, errors and timing
"""

import json
import math
import subprocess

import numpy as np
import pytest
import yaml

import setup
from config import Config, get_config, set_config
from constants import DEFAULT_INSTANCE
from exceptions import (
    ConfigurationError,
    GapForgeError,
    MemoryBudgetError,
    NoCrossingError,
    create_exception,
)
from logging_config import PerformanceLogger
from performance import check_memory_budget, get_performance_monitor
from utils import dumps_json, format_float, load_json_file, sanitize_json, save_csv_file, save_json_file
from validators import instance_violations, validate_control_set, validate_override, validate_seed


@pytest.fixture
def config(tmp_path, monkeypatch):
    for name in ("GAPFORGE_OUT", "GAPFORGE_LOG_LEVEL", "GAPFORGE_WORKERS"):
        monkeypatch.delenv(name, raising=False)
    return Config(config_dir=str(tmp_path))


def test_defaults(config):
    assert config.get("optimizer.N") == 200
    assert config.get("lp.solver") == "pdhg"
    assert config.get("instance.a") == pytest.approx(0.1)
    assert config.get("no.such.key", "fallback") == "fallback"


def test_set_and_get_all(config):
    config.set("optimizer.N", 40)
    assert config.get("optimizer.N") == 40
    snapshot = config.get_all()
    snapshot["optimizer"]["N"] = 1
    assert config.get("optimizer.N") == 40
    config.reset_to_defaults()
    assert config.get("optimizer.N") == 200


def test_overrides_are_typed(config):
    config.apply_overrides(["optimizer.N=30", "lp.solver=highs", "system.log_to_file=false", "optimizer.penalty_schedule=[1.0, 2.0]"])
    assert config.get("optimizer.N") == 30
    assert config.get("lp.solver") == "highs"
    assert config.get("system.log_to_file") is False
    assert config.get("optimizer.penalty_schedule") == [1.0, 2.0]


def test_unknown_override_key(config):
    with pytest.raises(ConfigurationError):
        config.apply_overrides(["optimizer.speed=3"])
    with pytest.raises(ConfigurationError):
        config.apply_overrides(["optimizer.N"])


def test_known_keys(config):
    keys = config.known_keys()
    assert "instance.control_set" in keys
    assert "instance.control_set.kind" not in keys
    assert "topology.coverage_threshold" in keys
    assert keys == sorted(keys)


def test_environment_overrides(tmp_path, monkeypatch):
    monkeypatch.setenv("GAPFORGE_OUT", str(tmp_path / "elsewhere"))
    monkeypatch.setenv("GAPFORGE_LOG_LEVEL", "DEBUG")
    monkeypatch.setenv("GAPFORGE_WORKERS", "0")
    config = Config(config_dir=str(tmp_path))
    assert config.get("output.directory") == str(tmp_path / "elsewhere")
    assert config.get("system.log_level") == "DEBUG"
    assert config.get("optimizer.workers") == 1


def test_yaml_file_is_merged(tmp_path, monkeypatch):
    monkeypatch.delenv("GAPFORGE_WORKERS", raising=False)
    (tmp_path / "gapforge_config.yaml").write_text(yaml.safe_dump({"optimizer": {"n_starts": 7}}))
    config = Config(config_dir=str(tmp_path))
    assert config.get("optimizer.n_starts") == 7
    assert config.get("optimizer.N") == 200


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigurationError):
        Config(config_file=str(tmp_path / "absent.yaml"))


def test_save_round_trip(config, tmp_path):
    target = tmp_path / "saved" / "config.yaml"
    config.set("optimizer.N", 55)
    assert config.save(str(target))
    reloaded = Config(config_file=str(target))
    assert reloaded.get("optimizer.N") == 55


def test_global_config():
    custom = Config(config_dir="nowhere")
    set_config(custom)
    try:
        assert get_config() is custom
    finally:
        set_config(None)
    assert get_config() is not custom
    set_config(None)


def test_instance_violations():
    assert instance_violations(DEFAULT_INSTANCE) == []
    codes = [code for code, _ in instance_violations({"d": 3, "a": -1.0})]
    assert len(codes) >= 2


def test_control_set_validation():
    assert validate_control_set({"kind": "SQUARE"})[0]
    assert validate_control_set({"kind": "CONVEX_SUPERSET", "bound": 2.0})[0]
    assert not validate_control_set({"kind": "SQUARE", "bound": 2.0})[0]
    assert not validate_control_set({"kind": "DISC"})[0]
    assert not validate_control_set("SQUARE")[0]


def test_seed_and_override_validation():
    assert validate_seed(0) == (True, "")
    assert not validate_seed(-1)[0]
    assert not validate_seed(True)[0]
    assert validate_override("optimizer.N=5", ["optimizer.N"])[0]
    assert not validate_override("optimizer.N=", ["optimizer.N"])[0]
    assert not validate_override("=5", ["optimizer.N"])[0]


def test_sanitize_json():
    data = {"x": np.float64(1.5), "n": np.int64(3), "v": np.arange(2), "inf": math.inf, "flag": np.bool_(True)}
    assert sanitize_json(data) == {"x": 1.5, "n": 3, "v": [0, 1], "inf": "inf", "flag": True}


def test_json_artifacts_are_canonical(tmp_path):
    path = save_json_file(str(tmp_path / "a.json"), {"b": 1, "a": [1.0, math.nan]})
    text = open(path).read()
    assert text == dumps_json({"a": [1.0, math.nan], "b": 1})
    assert text.endswith("\n")
    assert load_json_file(path) == {"a": [1.0, "nan"], "b": 1}
    assert load_json_file(str(tmp_path / "missing.json"), default={}) == {}
    with pytest.raises(OSError):
        load_json_file(str(tmp_path / "missing.json"))
    json.loads(text)


def test_csv_artifacts(tmp_path):
    path = save_csv_file(str(tmp_path / "t.csv"), ["quantity", "value"], [["margin", 0.1], ["n", 2]])
    assert open(path).read() == "quantity,value\nmargin,0.1\nn,2\n"
    assert format_float(1.0 / 3.0) == repr(1.0 / 3.0)


def test_memory_budget():
    check_memory_budget(1024, fraction=0.5, label="tiny")
    with pytest.raises(MemoryBudgetError) as info:
        check_memory_budget(10**18, fraction=0.5, label="huge")
    assert "huge" in str(info.value)


def test_error_codes():
    error = NoCrossingError()
    assert isinstance(error, GapForgeError)
    assert str(error).startswith("[")
    assert isinstance(create_exception("MEMORY_BUDGET", "too big"), MemoryBudgetError)
    unknown = create_exception("SOMETHING_ELSE", "odd")
    assert type(unknown) is GapForgeError
    assert unknown.error_code == "SOMETHING_ELSE"


def test_performance_logger_records_timings():
    monitor = get_performance_monitor()
    monitor.clear_metrics()
    with PerformanceLogger("unit-step") as timer:
        sum(range(100))
    assert timer.duration >= 0.0
    stats = monitor.get_metric_stats("unit-step")
    assert stats["count"] == 1
    assert monitor.totals()["unit-step"] == pytest.approx(timer.duration)
    monitor.clear_metrics()
    assert monitor.get_metric_stats("unit-step") == {}


def test_installer_finds_the_numerical_stack():
    assert setup.missing_core_modules() == []


def test_installer_stops_when_pip_fails(monkeypatch, capsys):
    def failing_pip(cmd, check):
        raise subprocess.CalledProcessError(1, cmd)

    monkeypatch.setattr(setup.subprocess, "run", failing_pip)
    with pytest.raises(SystemExit) as info:
        setup.main()
    assert info.value.code == 1
    assert "pip failed" in capsys.readouterr().out
