import json

import pytest

from noma_offload.config import ConfigError, ScenarioConfig, config_from_dict, load_config


def test_defaults_are_valid():
    cfg = ScenarioConfig().validate()
    assert cfg.scheduler.p_ave <= cfg.scheduler.p_max


def test_round_trip_through_dict():
    cfg = ScenarioConfig(n_devices=3, seeds=(4, 5)).with_overrides(**{"scheduler.v_param": 7.0, "env.fading": "none"})
    assert config_from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_all_problems_reported_at_once():
    with pytest.raises(ConfigError) as err:
        config_from_dict({"n_devices": 2, "scheduler": {"p_ave": 2.0, "p_max": 1.0, "feedback_period": 0},
                          "env": {"distances": [1.0]}})
    probs = err.value.problems
    assert any("p_ave" in p for p in probs)
    assert any("feedback_period" in p for p in probs)
    assert any("distances" in p for p in probs)


def test_schema_rejects_unknown_keys_and_types():
    with pytest.raises(ConfigError) as err:
        config_from_dict({"n_devices": "ten", "colour": "red"})
    text = str(err.value)
    assert "colour" in text and "n_devices" in text


@pytest.mark.parametrize("doc", [
    {"seeds": []},
    {"scheduler_kind": "tdma"},
    {"scheduler": {"log_base": "3"}},
    {"scheduler": {"noise_w": 0}},
    {"env": {"distance_range": [50, 10]}},
])
def test_invalid_documents(doc):
    with pytest.raises(ConfigError):
        config_from_dict(doc)


def test_load_config_errors(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(bad)
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"n_devices": 4, "horizon": 10}))
    assert load_config(good).n_devices == 4
