import json
from pathlib import Path

import pytest

from slicesteer.config import (ConfigError, config_from_dict, default_config,
                               default_dict, load_config)

REPO_ROOT = Path(__file__).resolve().parent.parent


def test_default_scenario_is_valid_and_sized():
    cfg = default_config()
    cfg.validate()
    assert cfg.topology.total_rbs == 84
    assert set(cfg.slices) == {"embb", "urllc", "mmtc"}
    assert sum(p.initial_rbgs for p in cfg.slices.values()) == 14
    assert cfg.intra_windows == 2000
    assert cfg.inter_windows == 100
    for profile in cfg.slices.values():
        assert len(profile.user_positions) == 3


def test_shipped_default_file_matches_builtin():
    path = REPO_ROOT / "configs" / "default.json"
    with open(path) as fh:
        assert json.load(fh) == default_dict()
    cfg = load_config(path)
    assert cfg.seed == default_config().seed


def test_overrides_merge_without_losing_siblings():
    cfg = config_from_dict({
        "seed": 9,
        "slices": {"embb": {"initial_rbgs": 3}, "mmtc": {"initial_rbgs": 6}},
    })
    assert cfg.seed == 9
    assert cfg.slices["embb"].initial_rbgs == 3
    assert cfg.slices["embb"].r_min == 16e6  # untouched sibling field
    assert cfg.slices["urllc"].initial_rbgs == 5
    assert cfg.slices["mmtc"].initial_rbgs == 6


def test_unknown_top_level_key_is_rejected():
    with pytest.raises(ConfigError, match="bogus"):
        config_from_dict({"bogus": 1})


def test_rbg_budget_must_balance():
    with pytest.raises(ConfigError, match="initial_rbgs"):
        config_from_dict({"slices": {"embb": {"initial_rbgs": 7}}})


def test_window_lengths_must_nest():
    with pytest.raises(ConfigError, match="inter_window_ttis"):
        config_from_dict({"intra_window_ttis": 7})
    with pytest.raises(ConfigError, match="total_ttis"):
        config_from_dict({"total_ttis": 20_100})


def test_steering_names_are_checked():
    cfg = config_from_dict({"steering": {"embb": "ar4", "inter": "ar1"}})
    assert cfg.steering["embb"] == "ar4"
    with pytest.raises(ConfigError, match="steering"):
        config_from_dict({"steering": {"urllc": "ar9"}})


def test_frozen_mode_needs_a_checkpoint():
    with pytest.raises(ConfigError, match="inter_checkpoint"):
        config_from_dict({"inter_mode": "frozen"})
    with pytest.raises(ConfigError, match="inter_mode"):
        config_from_dict({"inter_mode": "offline"})


def test_agent_knobs_are_validated():
    with pytest.raises(ConfigError, match="intra_agent"):
        config_from_dict({"intra_agent": {"discount": 1.5}})
    with pytest.raises(ConfigError, match="epsilon_decay_fraction"):
        config_from_dict({"inter_agent": {"epsilon_decay_fraction": 0.0}})


def test_decay_fraction_scales_with_run_length():
    cfg = default_config()
    hp = cfg.intra_agent.hyperparams(cfg.intra_windows)
    assert hp.epsilon_decay_steps == 300
    assert cfg.inter_agent.hyperparams(1).epsilon_decay_steps == 1


def test_load_config_error_paths(tmp_path):
    assert load_config("default").seed == 36
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(ConfigError, match="JSON"):
        load_config(bad)
    arr = tmp_path / "arr.json"
    arr.write_text("[1, 2]")
    with pytest.raises(ConfigError, match="object"):
        load_config(arr)


def test_load_config_applies_file_overrides(tmp_path):
    path = tmp_path / "short.json"
    path.write_text(json.dumps({"total_ttis": 400, "seed": 3}))
    cfg = load_config(path)
    assert cfg.total_ttis == 400 and cfg.seed == 3
    assert cfg.inter_windows == 2
