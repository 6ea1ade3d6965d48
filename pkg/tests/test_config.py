"""Strict JSON config parsing."""

from __future__ import annotations

import json
from pathlib import Path

import pytest

from bevshare.config import (
    ConfigError,
    ExperimentConfig,
    load_config,
    parse_config,
)

REPO = Path(__file__).resolve().parent.parent


def _minimal(**overrides):
    data = {
        "schema_version": 1,
        "grid": {"rows": 32, "cols": 32, "x_min": -8.0, "x_max": 8.0,
                 "y_min": -8.0, "y_max": 8.0},
        "scenario": {"n_agents": 2, "n_objects": 3, "channels": 2},
        "strategies": ["no_fusion", "fast2comm"],
        "seeds": [0, 1],
    }
    data.update(overrides)
    return data


def test_shipped_configs_load():
    default = load_config(REPO / "configs" / "default.json")
    assert isinstance(default, ExperimentConfig)
    assert default.scenario.n_agents == 4
    assert default.scenario.spec.rows == 96
    assert set(default.strategies) == {
        "no_fusion", "topk", "gtfs", "fast2comm", "fast2comm_test"
    }
    assert default.seeds == tuple(range(20))
    assert default.budgets[-1] is None
    assert default.threshold == 0.5

    smoke = load_config(REPO / "configs" / "smoke.json")
    assert len(smoke.seeds) == 2


def test_minimal_config_defaults():
    cfg = parse_config(_minimal())
    assert cfg.sigmas == (0.0,)
    assert cfg.budgets == (None,)
    assert cfg.k == 512
    assert cfg.head.scale == 30.0
    assert cfg.detector.score_thresh == 0.8
    assert cfg.scenario.sigma_e == 0.0  # per-run value, set by the sweep


def test_unknown_keys_rejected():
    with pytest.raises(ConfigError, match="unknown key"):
        parse_config(_minimal(extra=1))
    bad_grid = _minimal()
    bad_grid["grid"]["cell_size"] = 0.5
    with pytest.raises(ConfigError, match="grid"):
        parse_config(bad_grid)
    bad_scen = _minimal()
    bad_scen["scenario"]["speed"] = 3
    with pytest.raises(ConfigError, match="scenario"):
        parse_config(bad_scen)
    with pytest.raises(ConfigError, match="head"):
        parse_config(_minimal(head={"scale": 1.0, "slope": 2.0}))
    with pytest.raises(ConfigError, match="detector"):
        parse_config(_minimal(detector={"score_thresh": 0.5, "iou": 0.5}))
    bad_enc = _minimal()
    bad_enc["scenario"]["encoder"] = {"amplitude": 1.0, "gain": 2.0}
    with pytest.raises(ConfigError, match="encoder"):
        parse_config(bad_enc)


def test_schema_version_checked():
    with pytest.raises(ConfigError, match="schema_version"):
        parse_config(_minimal(schema_version=2))
    data = _minimal()
    del data["schema_version"]
    with pytest.raises(ConfigError, match="schema_version"):
        parse_config(data)


def test_missing_required_keys():
    data = _minimal()
    del data["grid"]
    with pytest.raises(ConfigError, match="grid"):
        parse_config(data)
    data = _minimal()
    del data["scenario"]["channels"]
    with pytest.raises(ConfigError, match="channels"):
        parse_config(data)


def test_value_validation_surfaces_as_config_error():
    with pytest.raises(ConfigError, match="strategy"):
        parse_config(_minimal(strategies=["warp_speed"]))
    with pytest.raises(ConfigError):
        parse_config(_minimal(strategies=[]))
    with pytest.raises(ConfigError):
        parse_config(_minimal(seeds=[]))
    with pytest.raises(ConfigError):
        parse_config(_minimal(threshold=1.5))
    with pytest.raises(ConfigError):
        parse_config(_minimal(budgets=[-5]))
    with pytest.raises(ConfigError):
        parse_config(_minimal(budgets="all"))


def test_null_budget_means_unlimited():
    cfg = parse_config(_minimal(budgets=[0, 256, None]))
    assert cfg.budgets == (0, 256, None)


def test_round_trip_through_file(tmp_path):
    data = _minimal(
        sigmas=[0.0, 0.2],
        budgets=[512, None],
        threshold=0.4,
        k=64,
        head={"scale": 12.0, "bias": -1.0},
        detector={"score_thresh": 0.7, "nms_iou": 0.4},
        out="results/roundtrip",
    )
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(data), encoding="utf-8")
    cfg = load_config(path)
    assert cfg.sigmas == (0.0, 0.2)
    assert cfg.budgets == (512, None)
    assert cfg.threshold == 0.4
    assert cfg.k == 64
    assert cfg.head.scale == 12.0
    assert cfg.detector.nms_iou == 0.4
    assert cfg.out == "results/roundtrip"
    assert cfg.scenario.spec.x_min == -8.0


def test_invalid_json_reported(tmp_path):
    with pytest.raises(ConfigError, match="object"):
        parse_config("not a dict")
    broken = tmp_path / "broken.json"
    broken.write_text("{broken", encoding="utf-8")
    with pytest.raises(ConfigError, match="JSON"):
        load_config(broken)
