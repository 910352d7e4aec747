"""CLI end-to-end: exit codes, file outputs, pipeline determinism."""

import json
import subprocess
import sys

import pytest

from gpal.cli import main
from gpal.data import load_features


def write_specs(tmp_path):
    synth_spec = {
        "n_per_class": [40, 30, 10],
        "dim": 3,
        "spread": 1.0,
        "seed": 2,
        "test_n_per_class": [8, 6, 2],
    }
    run_cfg = {
        "initial_size": 10,
        "batch_size": 6,
        "max_cycles": 2,
        "seed": 1,
        "num_inducing": 6,
        "mc_samples_predict": 32,
        "mc_samples_train": 16,
        "train": {"epochs": 4, "learning_rate": 0.05, "minibatch_size": 16, "seed": 0},
    }
    spec_path = tmp_path / "spec.json"
    cfg_path = tmp_path / "run.json"
    spec_path.write_text(json.dumps(synth_spec))
    cfg_path.write_text(json.dumps(run_cfg))
    return spec_path, cfg_path


def test_synth_then_al_pipeline(tmp_path):
    spec_path, cfg_path = write_specs(tmp_path)
    data = tmp_path / "blobs.gpalft"
    assert main(["synth", "--spec", str(spec_path), "--out", str(data)]) == 0
    ds = load_features(data)
    assert ds.n_samples == 96

    out = tmp_path / "runs"
    assert main(["al", "--config", str(cfg_path), "--data", str(data), "--out", str(out)]) == 0
    for name in ("curve.csv", "batches.csv", "report.json"):
        assert (out / name).exists()


def test_multi_seed_runs_and_aggregate(tmp_path, capsys):
    spec_path, cfg_path = write_specs(tmp_path)
    data = tmp_path / "blobs.gpalft"
    main(["synth", "--spec", str(spec_path), "--out", str(data)])
    out = tmp_path / "runs"
    assert main(["al", "--config", str(cfg_path), "--data", str(data), "--out", str(out), "--seeds", "1,2,3"]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["seed_1", "seed_2", "seed_3"]

    assert main(["report", "--runs", str(out), "--aggregate"]) == 0
    text = capsys.readouterr().out
    assert text.startswith("cycle,labeled_count,mean_accuracy,std_accuracy,n_runs")
    assert ",3" in text.splitlines()[1]


def test_train_and_eval_round_trip(tmp_path, capsys):
    spec_path, cfg_path = write_specs(tmp_path)
    data = tmp_path / "blobs.gpalft"
    main(["synth", "--spec", str(spec_path), "--out", str(data)])
    ckpt = tmp_path / "model.gpalck"
    assert main(["train", "--data", str(data), "--config", str(cfg_path), "--out", str(ckpt)]) == 0
    assert ckpt.exists()
    assert main(["eval", "--model", str(ckpt), "--data", str(data)]) == 0
    result = json.loads(capsys.readouterr().out)
    assert 0.0 <= result["test_accuracy"] <= 1.0


def test_pipeline_is_byte_deterministic(tmp_path):
    spec_path, cfg_path = write_specs(tmp_path)
    data = tmp_path / "blobs.gpalft"
    main(["synth", "--spec", str(spec_path), "--out", str(data)])
    out_a, out_b = tmp_path / "a", tmp_path / "b"
    main(["al", "--config", str(cfg_path), "--data", str(data), "--out", str(out_a)])
    main(["al", "--config", str(cfg_path), "--data", str(data), "--out", str(out_b)])
    for name in ("curve.csv", "batches.csv", "report.json"):
        assert (out_a / name).read_bytes() == (out_b / name).read_bytes()


def test_missing_config_flag_exits_one(capsys):
    assert main(["al", "--data", "x", "--out", "y"]) == 1


def test_missing_data_file_exits_three(tmp_path):
    _, cfg_path = write_specs(tmp_path)
    assert main(["al", "--config", str(cfg_path), "--data", str(tmp_path / "nope.gpalft"), "--out", str(tmp_path / "o")]) == 3


def test_bad_config_value_exits_one(tmp_path):
    spec_path, _ = write_specs(tmp_path)
    data = tmp_path / "blobs.gpalft"
    main(["synth", "--spec", str(spec_path), "--out", str(data)])
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"batch_size": 0}))
    assert main(["al", "--config", str(bad), "--data", str(data), "--out", str(tmp_path / "o")]) == 1


@pytest.mark.parametrize("args", [["synth", "--spec"], ["definitely-not-a-command"]])
def test_usage_errors_exit_one(args):
    assert main(args) == 1


def test_console_script_entrypoint(tmp_path):
    """The installed `gpal` command answers --help through a real process."""
    proc = subprocess.run(
        [sys.executable, "-m", "gpal.cli", "--help"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "synth" in proc.stdout and "serve" in proc.stdout
