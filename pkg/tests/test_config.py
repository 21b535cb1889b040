import json

import numpy as np
import pytest

from feelsched.config import ConfigError, load_config, parse_config, resolved_text
from feelsched.instances import instance_from_dict, instance_to_dict, load_instance, random_instance, save_instance
from feelsched.scheduler import schedule_das


def test_minimal_config_uses_defaults():
    cfg = parse_config("[sim]\nseed = 5\n")
    assert cfg.seed == 5 and cfg.num_devices == 100 and cfg.scheduler == "das"
    assert cfg.scheduler_config.lambda_I == 0.5


def test_seed_required_unless_overridden():
    with pytest.raises(ConfigError, match="sim.seed"):
        parse_config("[sim]\nrounds = 3\n")
    assert parse_config("[sim]\nrounds = 3\n", seed_override=9).seed == 9


def test_override_beats_file():
    assert parse_config("[sim]\nseed = 1\n", seed_override=2).seed == 2


def test_case_sensitive_keys_and_none():
    cfg = parse_config("[sim]\nseed = 1\n[scheduler]\nlambda_E = 0.4\nmax_devices = none\ngamma_age = 0.5\n")
    assert cfg.scheduler_config.lambda_E == 0.4
    assert cfg.scheduler_config.max_devices is None
    assert cfg.metric_weights.gamma_age == 0.5


def test_errors_name_line_and_key():
    with pytest.raises(ConfigError) as err:
        parse_config("[sim]\nseed = 1\n\n[fl]\nhidden = 3\n", "x.ini")
    msg = str(err.value)
    assert "x.ini" in msg and "line 5" in msg and "fl.hidden" in msg and "hidden_dim" in msg


def test_bad_value():
    with pytest.raises(ConfigError, match="sim.rounds"):
        parse_config("[sim]\nseed = 1\nrounds = many\n")


def test_unknown_scheduler_lists_valid_names():
    with pytest.raises(ConfigError, match="das, abs, random, all"):
        parse_config("[sim]\nseed = 1\nscheduler = fastest\n")


def test_unknown_section():
    with pytest.raises(ConfigError, match="unknown section"):
        parse_config("[sim]\nseed = 1\n[extra]\na = 1\n")


def test_invalid_range():
    with pytest.raises(ConfigError):
        parse_config("[sim]\nseed = 1\npower_w_min = 3\npower_w_max = 2\n")


def test_resolved_round_trip(tmp_path):
    cfg = parse_config("[sim]\nseed = 4\nrounds = 7\npower_w_max = 4.5\n[radio]\nnoise_psd = 2e-13\n[data]\nshard_size = 25\n")
    text = resolved_text(cfg)
    again = parse_config(text)
    assert again == cfg
    assert resolved_text(again) == text


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/config.ini")


def test_instance_round_trip(tmp_path):
    inst = random_instance(6, np.random.default_rng(0), min_devices=2)
    save_instance(inst, tmp_path / "i.json")
    back = load_instance(tmp_path / "i.json")
    assert back.devices == inst.devices
    assert back.index.tolist() == inst.index.tolist()
    assert back.config.min_devices == 2
    a = schedule_das(inst.devices, inst.index, inst.params, inst.config)
    b = schedule_das(back.devices, back.index, back.params, back.config)
    assert a.to_dict() == b.to_dict()


def test_instance_train_time_from_hardware():
    doc = {
        "devices": [{"id": 0, "gain_sq": 1e-7, "power_W": 2, "cpu_hz": 2e9, "cycles_per_bit": 20, "dataset_size": 100, "index": 0.5}],
        "config": {"N": 1},
    }
    inst = instance_from_dict(doc)
    assert inst.devices[0].train_time_s == pytest.approx(100 * 6272 * 20 / 2e9)


def test_instance_missing_key():
    doc = instance_to_dict(random_instance(2, np.random.default_rng(0)))
    del doc["devices"][1]["gain_sq"]
    with pytest.raises(ValueError, match="gain_sq"):
        instance_from_dict(json.loads(json.dumps(doc)))
