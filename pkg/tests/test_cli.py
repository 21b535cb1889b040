import json

import numpy as np
import pytest

from feelsched import records
from feelsched.cli import main, relative_gap
from feelsched.instances import instance_to_dict, random_instance

SMALL = """[sim]
seed = 2
num_devices = 10
rounds = 2

[fl]
hidden_dim = 8

[data]
samples_per_class = 50
feature_dim = 6
shard_size = 10
shards_max = 4
"""


@pytest.fixture
def cfg(tmp_path):
    p = tmp_path / "c.ini"
    p.write_text(SMALL)
    return p


def test_relative_gap():
    assert relative_gap(0.9, 1.0) == pytest.approx(0.1)
    assert relative_gap(1.1, 1.0) == 0.0
    assert relative_gap(-1.1, -1.0) == pytest.approx(0.1)


def test_run_writes_outputs(cfg, tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    rows = records.read_rounds_csv(out / "rounds.csv")
    assert [r.round for r in rows] == [1, 2]
    assert rows[0].experiment_id == "das-seed2"
    summary = json.loads((out / "summary.json").read_text())
    assert summary["rounds_run"] == 2 and summary["total_energy_J"] == rows[-1].cumulative_energy_J
    # the resolved config reproduces the run byte for byte
    again = tmp_path / "again"
    assert main(["run", "--config", str(out / "config.resolved.ini"), "--out", str(again)]) == 0
    assert (again / "rounds.csv").read_bytes() == (out / "rounds.csv").read_bytes()
    assert (again / "config.resolved.ini").read_bytes() == (out / "config.resolved.ini").read_bytes()


def test_csv_round_trip(cfg, tmp_path):
    out = tmp_path / "o"
    main(["run", "--config", str(cfg), "--out", str(out)])
    rows = records.read_rounds_csv(out / "rounds.csv")
    records.write_rounds_csv(rows, tmp_path / "copy.csv")
    assert (tmp_path / "copy.csv").read_bytes() == (out / "rounds.csv").read_bytes()


def test_seed_flag(cfg, tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out", str(out), "--seed", "7"]) == 0
    assert records.read_rounds_csv(out / "rounds.csv")[0].experiment_id == "das-seed7"


def test_missing_seed_is_usage_error(tmp_path, capsys):
    p = tmp_path / "c.ini"
    p.write_text("[sim]\nrounds = 1\n")
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "sim.seed" in capsys.readouterr().err


def test_unknown_scheduler(tmp_path, capsys):
    p = tmp_path / "c.ini"
    p.write_text("[sim]\nseed = 1\nscheduler = fastest\n")
    assert main(["run", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "das, abs, random, all" in capsys.readouterr().err


def test_bad_arguments():
    assert main([]) == 2
    assert main(["run"]) == 2
    assert main(["--help"]) == 0


def test_sweep(cfg, tmp_path):
    out = tmp_path / "s"
    assert main(["sweep", "--config", str(cfg), "--out", str(out), "--runs", "2"]) == 0
    assert sorted(p.name for p in (out / "runs").iterdir()) == ["das-seed2.csv", "das-seed3.csv"]
    summary = json.loads((out / "summary.json").read_text())
    assert summary["completed"] == 2 and summary["failed"] == 0
    curves = (out / "mean_curves.csv").read_text().splitlines()
    assert curves[0] == "round,mean_accuracy,std_accuracy,mean_energy,mean_duration" and len(curves) == 3
    assert main(["sweep", "--config", str(cfg), "--out", str(out), "--runs", "0"]) == 2


def write_instance(tmp_path, K, N=1, seed=0, deadline_s=0.3):
    path = tmp_path / f"i{K}.json"
    doc = instance_to_dict(random_instance(K, np.random.default_rng(seed), min_devices=N))
    doc["config"]["deadline_s"] = deadline_s
    path.write_text(json.dumps(doc))
    return path


def test_oracle_single_device(tmp_path, capsys):
    assert main(["oracle", str(write_instance(tmp_path, 1, deadline_s=None))]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["gap"] == 0.0 and report["das"]["selected"] == [0]


def test_oracle_all_forced(tmp_path, capsys):
    path = tmp_path / "i.json"
    doc = instance_to_dict(random_instance(4, np.random.default_rng(3)))
    doc["config"].update(N=4, deadline_s=None)
    path.write_text(json.dumps(doc))
    assert main(["oracle", str(path)]) == 0
    assert json.loads(capsys.readouterr().out)["gap"] == pytest.approx(0.0, abs=1e-9)


def test_oracle_too_large(tmp_path, capsys):
    assert main(["oracle", str(write_instance(tmp_path, 13))]) == 2
    assert "oracle limit" in capsys.readouterr().err


def test_oracle_bad_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{}")
    assert main(["oracle", str(bad)]) == 2
    assert main(["oracle", str(tmp_path / "missing.json")]) == 2


def test_partition(tmp_path, capsys):
    p = tmp_path / "p.ini"
    p.write_text("[sim]\nseed = 1\n[data]\nsamples_per_class = 6000\n")
    assert main(["partition", "--config", str(p), "--csv", str(tmp_path / "part.csv")]) == 0
    out = capsys.readouterr().out
    assert out.startswith("1200 shards of 50 formed")
    lines = (tmp_path / "part.csv").read_text().splitlines()
    assert lines[0] == "device,dataset_size,gini_simpson,shards" and len(lines) == 101
