import math

import numpy as np
import pandas as pd
import pytest

from qbayes import sweep
from qbayes.config import RunConfig
from qbayes.data import FEATURE_BOX
from qbayes.errors import InvalidArgumentError, NumericalError, SweepError, exit_code_for
from qbayes.sweep import (
    SWEEP_COLUMNS,
    Method,
    SweepKind,
    configure_sweep,
    prepare_datasets,
    run_experiment_sweep,
    summarize_sweep,
    write_summary_ods,
    write_sweep_csv,
)
from qbayes.training import qmap_classify


def _tiny(seed: int = 0) -> RunConfig:
    return RunConfig.from_mapping(
        {
            "feature_map": {"hidden_qubits": 1},
            "ansatz": {"layers": 1},
            "spsa": {"iterations": 2},
            "qpde": {"n_samples": 2, "depth": 1},
            "generator": {"n_train_per_class": 3, "n_test_per_class": 2},
        }
    ).with_seed(seed)


def test_configure_sweep_targets():
    base = _tiny()
    assert configure_sweep(base, SweepKind.DEPTH, Method.QMAP, 3).ansatz.layers == 3
    assert configure_sweep(base, SweepKind.DEPTH, Method.QPDE, 4).qpde.depth == 4
    assert configure_sweep(base, SweepKind.SAMPLES, Method.QPDE, 7).qpde.n_samples == 7
    interval = configure_sweep(base, SweepKind.INTERVAL, Method.QPDE, math.pi)
    assert interval.qpde.interval == pytest.approx(math.pi)


def test_configure_sweep_rejects():
    base = _tiny()
    with pytest.raises(InvalidArgumentError):
        configure_sweep(base, SweepKind.SAMPLES, Method.QMAP, 5)
    with pytest.raises(InvalidArgumentError):
        configure_sweep(base, SweepKind.INTERVAL, Method.QMAP, 1.0)
    with pytest.raises(InvalidArgumentError):
        configure_sweep(base, SweepKind.DEPTH, Method.QPDE, 1.5)
    with pytest.raises(InvalidArgumentError):
        configure_sweep(base, SweepKind.SAMPLES, Method.QPDE, 0)


def test_prepare_datasets_rescales_with_training_statistics():
    cfg = _tiny().updated(rescale=True)
    train, test = prepare_datasets(cfg)
    assert train.rescale_record is not None
    assert test.rescale_record is train.rescale_record
    assert np.all(train.features >= 0) and np.all(train.features < FEATURE_BOX)
    assert train.features.min() == pytest.approx(0.0, abs=1e-12)


def test_prepare_datasets_keeps_given_splits():
    train, test = prepare_datasets(_tiny(3).updated(rescale=False))
    again_train, again_test = prepare_datasets(_tiny(9).updated(rescale=False), train, test)
    assert again_train is train and again_test is test


def test_prepare_datasets_rescales_by_default():
    assert RunConfig().rescale
    raw_train, raw_test = prepare_datasets(_tiny(3).updated(rescale=False))
    train, test = prepare_datasets(_tiny(3), raw_train, raw_test)
    assert train.rescale_record is not None
    assert test.rescale_record is train.rescale_record
    assert train.features.max(axis=0).tolist() == pytest.approx([FEATURE_BOX] * 2, abs=1e-6)


def test_single_value_sweep_rows():
    table = run_experiment_sweep("samples", [2], _tiny(5), repetitions=3)
    assert list(table.columns) == SWEEP_COLUMNS
    assert len(table) == 3
    assert table["repetition"].tolist() == [0, 1, 2]
    assert table["seed"].tolist() == [5, 6, 7]
    assert set(table["sweep_var"]) == {"samples"}
    assert table["accuracy"].between(0.0, 1.0).all()


def test_rows_follow_grid_order():
    table = run_experiment_sweep(SweepKind.DEPTH, [2, 1], _tiny(), repetitions=2)
    assert table["value"].tolist() == [2, 2, 1, 1]
    assert table["repetition"].tolist() == [0, 1, 0, 1]


def test_sweep_is_deterministic_and_thread_invariant():
    first = run_experiment_sweep("samples", [1, 2], _tiny(1), repetitions=2)
    second = run_experiment_sweep("samples", [1, 2], _tiny(1), repetitions=2)
    threaded = run_experiment_sweep("samples", [1, 2], _tiny(1), repetitions=2, threads=3)
    pd.testing.assert_frame_equal(first, second)
    pd.testing.assert_frame_equal(first, threaded)


def test_qmap_depth_sweep():
    table = run_experiment_sweep("depth", [1], _tiny(), method="qmap", repetitions=1)
    assert len(table) == 1
    assert 0.0 <= table["accuracy"].iloc[0] <= 1.0


def test_sweep_argument_checks():
    with pytest.raises(InvalidArgumentError):
        run_experiment_sweep("samples", [], _tiny())
    with pytest.raises(InvalidArgumentError):
        run_experiment_sweep("samples", [1], _tiny(), repetitions=0)
    with pytest.raises(ValueError):
        run_experiment_sweep("width", [1], _tiny())


def test_failed_job_keeps_partial_rows(monkeypatch):
    def fake_job(config, method, train, test):
        if config.qpde.n_samples == 2:
            raise NumericalError("posterior vanished")
        return 0.5

    monkeypatch.setattr(sweep, "_run_job", fake_job)
    with pytest.raises(SweepError) as info:
        run_experiment_sweep("samples", [1, 2], _tiny(), repetitions=2)
    error = info.value
    assert exit_code_for(error) == 4
    assert "samples=2" in str(error)
    assert error.partial["value"].tolist() == [1, 1]
    assert error.partial["accuracy"].tolist() == [0.5, 0.5]


def _table() -> pd.DataFrame:
    return pd.DataFrame(
        [
            ("samples", 10, 0, 0, 0.5),
            ("samples", 10, 1, 1, 0.7),
            ("samples", 20, 0, 0, 0.9),
        ],
        columns=SWEEP_COLUMNS,
    )


def test_summarize_sweep():
    summary = summarize_sweep(_table())
    assert summary["value"].tolist() == [10, 20]
    first = summary.iloc[0]
    assert first["mean"] == pytest.approx(0.6)
    assert first["std"] == pytest.approx(math.sqrt(0.02))
    assert (first["min"], first["max"], first["repetitions"]) == (0.5, 0.7, 2)
    assert math.isnan(summary.iloc[1]["std"])
    assert summarize_sweep(pd.DataFrame(columns=SWEEP_COLUMNS)).empty


def test_write_sweep_csv(tmp_path):
    path = write_sweep_csv(_table(), tmp_path / "out" / "sweep.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(SWEEP_COLUMNS)
    assert lines[1] == "samples,10,0,0,0.5"


def test_write_summary_ods(tmp_path):
    path = write_summary_ods(summarize_sweep(_table()), tmp_path / "summary.ods")
    back = pd.read_excel(path, engine="odf", sheet_name="Sweep summary")
    assert back["value"].tolist() == [10, 20]
    assert back["mean"].tolist() == pytest.approx([0.6, 0.9])


X_STAR = (4.272566, 5.08938)
Y_STAR = (5.08938, 3.39293)


def _qpde_mean_accuracy(n_samples: int, interval: float, seeds: range) -> float:
    scores = []
    for seed in seeds:
        cfg = RunConfig().with_seed(seed).updated("qpde", n_samples=n_samples, interval=interval)
        train, test = prepare_datasets(cfg)
        scores.append(sweep.evaluate_qpde(cfg, train, test, threads=4)[1])
    return float(np.mean(scores))


@pytest.mark.slow
def test_qmap_default_run_reaches_accuracy_band():
    scores = []
    for seed in range(10):
        cfg = RunConfig().with_seed(seed)
        train, test = prepare_datasets(cfg)
        model = sweep.fit_model(cfg, train)
        trace = np.array(model.trace)
        decile = len(trace) // 10
        assert trace[-decile:].mean() > trace[:decile].mean()
        scores.append(sweep.evaluate_model(model, test)[1])
    assert np.mean(scores) >= 0.90


@pytest.mark.slow
def test_qmap_default_run_classifies_named_points():
    cfg = RunConfig()
    train, _ = prepare_datasets(cfg)
    model = sweep.fit_model(cfg, train)
    assert train.rescale_record is not None
    x_star, y_star = train.rescale_record.apply_clipped(np.array([X_STAR, Y_STAR]))
    assert qmap_classify(model, x_star).label == 1
    assert qmap_classify(model, y_star).label == -1


@pytest.mark.slow
def test_qpde_default_run_reaches_accuracy_band():
    mean = _qpde_mean_accuracy(40, 0.2 * math.pi, range(10))
    assert 0.80 <= mean <= 0.90


@pytest.mark.slow
def test_qpde_more_samples_over_wider_interval_is_not_worse():
    narrow = _qpde_mean_accuracy(20, 0.2 * math.pi, range(10))
    wide = _qpde_mean_accuracy(80, 2 * math.pi, range(10))
    assert wide >= narrow
