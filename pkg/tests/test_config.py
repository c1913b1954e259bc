"""Configuration defaults, merging and validation."""

import pytest
import yaml

from osnrnn.config import ConfigError, deep_merge, default_config, dump_config, load_config


def test_defaults_validate():
    cfg = default_config()
    assert cfg["channel_plan"]["n_channels"] == 13 and cfg["nn"]["test_fraction"] == 0.22


def test_deep_merge_keeps_siblings():
    merged = deep_merge({"a": {"x": 1, "y": 2}, "b": 3}, {"a": {"y": 5}})
    assert merged == {"a": {"x": 1, "y": 5}, "b": 3}


def test_precedence_file_then_overrides(tmp_path, monkeypatch):
    p = tmp_path / "c.yaml"
    p.write_text(yaml.safe_dump({"dsp": {"n_taps": 21, "phase_window": 32}}))
    cfg = load_config(p, {"dsp": {"n_taps": 25}})
    assert cfg["dsp"]["n_taps"] == 25 and cfg["dsp"]["phase_window"] == 32
    monkeypatch.setenv("OSNRNN_CONFIG", str(p))
    assert load_config()["dsp"]["n_taps"] == 21


def test_dump_round_trip():
    cfg = default_config()
    assert yaml.safe_load(dump_config(cfg)) == cfg


@pytest.mark.parametrize("override", [
    {"schema_version": 2},
    {"channel_plan": {"n_channels": 0}},
    {"emulator": {"pattern_count": 1.5}},
    {"route": {"min_spans": 5, "max_spans": 2}},
    {"validity": {"min_gap_db": 30.0}},
    {"scenario": {"modes": {"99-1T": 1.0}}},
    {"nn": {"test_fraction": 1.0}},
    {"calibration": {"eye_closure": 0.0}},
])
def test_invalid(override):
    with pytest.raises(ConfigError):
        load_config(overrides=override)


def test_unreadable_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.yaml")
    (tmp_path / "list.yaml").write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "list.yaml")
