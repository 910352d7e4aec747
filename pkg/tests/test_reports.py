"""CSV/JSON emission: fixed column orders, byte-stable output."""

import json

import pytest

from gpal.data import SynthSpec, synth_blobs
from gpal.engine import ALConfig, SimulatedOracle, run_al
from gpal.reports import (
    batches_csv_text,
    curve_csv_text,
    load_report,
    report_json_text,
    write_report,
)
from gpal.svgp import TrainConfig


@pytest.fixture(scope="module")
def report():
    ds = synth_blobs(
        SynthSpec(n_per_class=[40, 30, 10], dim=3, spread=1.0, seed=2, test_n_per_class=[8, 6, 2])
    )
    cfg = ALConfig(
        initial_size=10,
        batch_size=6,
        max_cycles=2,
        seed=1,
        num_inducing=6,
        mc_samples_predict=32,
        mc_samples_train=16,
        train=TrainConfig(epochs=4, learning_rate=0.05, minibatch_size=16, seed=0),
    )
    return run_al(ds, cfg, SimulatedOracle(ds))


def test_curve_csv_columns(report):
    lines = curve_csv_text(report).splitlines()
    assert lines[0] == "cycle,labeled_count,test_accuracy,seed,strategy,model_kind"
    assert len(lines) == 1 + len(report.curve)
    first = lines[1].split(",")
    assert first[0] == "0" and first[3] == "1" and first[4] == "uncertainty" and first[5] == "svgp"


def test_batches_csv_has_baseline_rows(report):
    lines = batches_csv_text(report).splitlines()
    assert lines[0] == "cycle,class_name,fraction"
    baseline = [l for l in lines[1:] if l.startswith("0,")]
    assert len(baseline) == 3
    assert len(lines) == 1 + 3 + 3 * len(report.batches)


def test_report_json_round_trip(report, tmp_path):
    paths = write_report(report, tmp_path)
    loaded = load_report(paths["report.json"])
    assert loaded.curve == report.curve
    assert loaded.seed == report.seed
    assert loaded.config == report.config


def test_emission_is_byte_stable(report, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    write_report(report, a)
    write_report(report, b)
    for name in ("curve.csv", "batches.csv", "report.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_json_floats_survive_round_trip(report):
    raw = json.loads(report_json_text(report))
    assert raw["curve"][0]["test_accuracy"] == report.curve[0]["test_accuracy"]
