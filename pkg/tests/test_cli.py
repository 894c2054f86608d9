import json
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

from qbayes.cli import main
from qbayes.config import load_run_config

TINY = """\
[feature_map]
hidden_qubits = 1

[ansatz]
layers = 1

[spsa]
iterations = 3

[qpde]
n_samples = 2
depth = 1

[generator]
n_train_per_class = 3
n_test_per_class = 2
"""


@pytest.fixture
def config_dir(tmp_path: Path, monkeypatch) -> Path:
    directory = tmp_path / "cfg"
    directory.mkdir()
    (directory / "run_config.toml").write_text(TINY)
    monkeypatch.setenv("QBAYES_CONFIG_DIR", str(directory))
    return directory


@pytest.fixture
def data_dir(tmp_path: Path, config_dir: Path) -> Path:
    out = tmp_path / "data"
    assert main(["generate", "--out", str(out)]) == 0
    return out


def _train(data_dir: Path, out: Path, *extra: str) -> int:
    return main(["train", str(data_dir / "train.csv"), "--out", str(out), *extra])


def _json(path: Path) -> dict:
    return json.loads(path.read_text())


def test_generate_writes_balanced_csvs(tmp_path, config_dir, capsys):
    out = tmp_path / "gen"
    assert main(["generate", "--out", str(out), "--n-train", "1"]) == 0
    lines = (out / "train.csv").read_text().splitlines()
    assert lines[0] == "x1,x2,label"
    assert len(lines) == 3
    assert sorted(line.rsplit(",", 1)[1] for line in lines[1:]) == ["+1", "-1"]
    assert "Wrote 2 training samples" in capsys.readouterr().out


def test_generate_is_reproducible(tmp_path, config_dir):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["generate", "--out", str(a), "--seed", "7"]) == 0
    assert main(["generate", "--out", str(b), "--seed", "7"]) == 0
    assert (a / "train.csv").read_bytes() == (b / "train.csv").read_bytes()
    assert (a / "test.csv").read_bytes() == (b / "test.csv").read_bytes()


def test_generate_refuses_to_overwrite(tmp_path, config_dir, capsys):
    out = tmp_path / "gen"
    assert main(["generate", "--out", str(out)]) == 0
    assert main(["generate", "--out", str(out)]) == 2
    assert "--overwrite" in capsys.readouterr().err
    assert main(["generate", "--out", str(out), "--overwrite"]) == 0


def test_generate_default_sizes(tmp_path, monkeypatch):
    monkeypatch.setenv("QBAYES_CONFIG_DIR", str(tmp_path / "empty"))
    out = tmp_path / "gen"
    assert main(["generate", "--out", str(out)]) == 0
    assert len(pd.read_csv(out / "train.csv")) == 800
    assert len(pd.read_csv(out / "test.csv")) == 80


def test_train_then_predict(tmp_path, data_dir):
    run = tmp_path / "run"
    assert _train(data_dir, run) == 0
    trained = _json(run / "train-result.json")
    assert trained["schema_version"] == 1
    assert trained["command"] == "train"
    assert len(trained["metrics"]["posterior_trace"]) == 3
    assert trained["metrics"]["evaluations"] == 6
    assert trained["config"]["spsa"]["iterations"] == 3
    assert (run / "model.json").exists()

    model = str(run / "model.json")
    assert main(["predict", model, str(data_dir / "test.csv"), "--out", str(run)]) == 0
    predicted = _json(run / "predict-result.json")["metrics"]
    assert 0.0 <= predicted["accuracy"] <= 1.0
    assert len(predicted["predictions"]) == 4
    for row in predicted["predictions"]:
        assert row["label"] in (-1, 1)
        assert row["p0"] + row["p1"] == pytest.approx(1.0, abs=1e-9)
    assert predicted["final_posterior"] == trained["metrics"]["posterior_trace"][-1]


def test_zero_step_training_keeps_initial_parameters(tmp_path, data_dir, config_dir):
    run = tmp_path / "run"
    assert _train(data_dir, run, "--iterations", "1", "--eta", "0") == 0
    theta = np.array(_json(run / "model.json")["ansatz"]["theta"])
    initial = load_run_config().initial_params().theta.reshape(-1)
    assert np.allclose(theta, initial, rtol=0, atol=1e-15)


def test_training_is_deterministic(tmp_path, data_dir):
    a, b = tmp_path / "a", tmp_path / "b"
    assert _train(data_dir, a, "--seed", "3") == 0
    assert _train(data_dir, b, "--seed", "3") == 0
    assert (a / "model.json").read_bytes() == (b / "model.json").read_bytes()
    first, second = _json(a / "train-result.json"), _json(b / "train-result.json")
    assert first["metrics"] == second["metrics"]
    test_csv = str(data_dir / "test.csv")
    assert main(["predict", str(a / "model.json"), test_csv, "--out", str(a)]) == 0
    assert main(["predict", str(b / "model.json"), test_csv, "--out", str(b)]) == 0
    first, second = _json(a / "predict-result.json"), _json(b / "predict-result.json")
    first.pop("wall_clock_seconds")
    second.pop("wall_clock_seconds")
    assert first == second


def test_predict_points_and_wavefunction(tmp_path, data_dir):
    run = tmp_path / "run"
    assert _train(data_dir, run) == 0
    args = ["predict", "--out", str(run), "--point", "4.272566,5.08938"]
    assert main([*args, "--dump-wavefunction", "--boundary-grid", "3"]) == 0
    metrics = _json(run / "predict-result.json")["metrics"]
    assert "accuracy" not in metrics
    assert metrics["points"][0]["x"] == [4.272566, 5.08938]
    wave = pd.read_csv(run / metrics["wavefunction_file"])
    assert len(wave) == 16
    assert (wave["magnitude"] ** 2).sum() == pytest.approx(1.0, abs=1e-9)
    assert wave["bitstring"].astype(str).str.len().max() <= 4
    boundary = pd.read_csv(run / metrics["boundary_file"])
    assert list(boundary.columns) == ["x1", "x2", "label", "p1"]
    assert len(boundary) == 9
    raw = pd.read_csv(data_dir / "train.csv")
    for column in ("x1", "x2"):
        assert boundary[column].between(raw[column].min(), raw[column].max()).all()


def test_predict_error_exit_codes(tmp_path, data_dir):
    run = tmp_path / "run"
    assert main(["predict", str(run / "missing.json"), "--out", str(run)]) == 2
    assert _train(data_dir, run) == 0
    model = str(run / "model.json")
    assert main(["predict", model, str(tmp_path / "missing.csv"), "--out", str(run)]) == 3


def test_qpde_command(tmp_path, data_dir):
    run = tmp_path / "run"
    train_csv, test_csv = str(data_dir / "train.csv"), str(data_dir / "test.csv")
    assert main(["qpde", train_csv, test_csv, "--out", str(run), "--samples", "1"]) == 0
    record = _json(run / "qpde-result.json")
    assert record["config"]["qpde"]["n_samples"] == 1
    assert len(record["metrics"]["posterior_weights"]) == 1
    assert len(record["metrics"]["predictions"]) == 4
    assert 0.0 <= record["metrics"]["accuracy"] <= 1.0


def test_qpde_interval_literal(tmp_path, data_dir):
    run = tmp_path / "run"
    args = ["qpde", str(data_dir / "train.csv"), str(data_dir / "test.csv"), "--out", str(run)]
    assert main([*args, "--interval", "0.5pi"]) == 0
    interval = _json(run / "qpde-result.json")["config"]["qpde"]["interval"]
    assert interval == pytest.approx(0.5 * np.pi)
    assert main([*args, "--interval", "wide", "--overwrite"]) == 2


def test_sweep_command(tmp_path, config_dir):
    run = tmp_path / "run"
    assert main(["sweep", "samples", "1,2", "--repetitions", "2", "--out", str(run), "--ods"]) == 0
    table = pd.read_csv(run / "sweep.csv")
    assert len(table) == 4
    assert table["value"].tolist() == [1, 1, 2, 2]
    assert (run / "sweep-summary.ods").exists()
    summary = _json(run / "sweep-result.json")["metrics"]["summary"]
    assert [row["repetitions"] for row in summary] == [2, 2]


def test_sweep_rejects_qmap_sample_grid(tmp_path, config_dir):
    run = tmp_path / "run"
    assert main(["sweep", "samples", "1", "--method", "qmap", "--out", str(run)]) == 2


def test_unknown_option(config_dir):
    assert main(["train", "--bogus"]) == 2


def test_config_dir_command(config_dir, capsys):
    assert main(["config-dir"]) == 0
    assert capsys.readouterr().out.strip() == str(config_dir)


def test_config_dir_create(tmp_path, monkeypatch, capsys):
    directory = tmp_path / "fresh"
    monkeypatch.setenv("QBAYES_CONFIG_DIR", str(directory))
    assert main(["config-dir"]) == 0
    assert not directory.exists()
    assert main(["config-dir", "--create"]) == 0
    assert directory.is_dir()
    assert capsys.readouterr().out.splitlines()[-1] == str(directory)


def test_model_records_training_rescale(tmp_path, data_dir):
    run = tmp_path / "run"
    assert _train(data_dir, run) == 0
    rescale = _json(run / "model.json")["rescale"]
    assert rescale is not None
    assert len(rescale["offsets"]) == 2


def test_point_goes_through_model_rescale(tmp_path, data_dir):
    run = tmp_path / "run"
    assert _train(data_dir, run) == 0
    single = tmp_path / "single.csv"
    single.write_text("x1,x2,label\n4.272566,5.08938,+1\n")
    model = str(run / "model.json")
    assert main(["predict", model, str(single), "--out", str(run)]) == 0
    from_csv = _json(run / "predict-result.json")["metrics"]["predictions"][0]
    args = ["predict", model, "--out", str(run), "--point", "4.272566,5.08938", "--overwrite"]
    assert main(args) == 0
    from_point = _json(run / "predict-result.json")["metrics"]["points"][0]
    assert from_csv["x"] == from_point["x"] == [4.272566, 5.08938]
    assert from_point["p0"] == pytest.approx(from_csv["p0"], abs=1e-12)
    assert from_point["label"] == from_csv["label"]


def test_predict_threads_do_not_change_results(tmp_path, data_dir):
    run = tmp_path / "run"
    assert _train(data_dir, run) == 0
    model, test_csv = str(run / "model.json"), str(data_dir / "test.csv")
    assert main(["predict", model, test_csv, "--out", str(run)]) == 0
    single = _json(run / "predict-result.json")["metrics"]
    args = ["predict", model, test_csv, "--out", str(run), "--threads", "3", "--overwrite"]
    assert main(args) == 0
    record = _json(run / "predict-result.json")
    assert record["config"]["threads"] == 3
    assert record["metrics"] == single


def test_sweep_integer_grids(tmp_path, config_dir):
    run = tmp_path / "run"
    assert main(["sweep", "depth", "1..2:0.5", "--out", str(run)]) == 2
    assert main(["sweep", "samples", "1.5", "--out", str(run)]) == 2
    assert main(["sweep", "width", "1", "--out", str(run)]) == 2
    assert not (run / "sweep.csv").exists()
