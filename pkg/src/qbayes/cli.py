import logging
import math
import os
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd
from cyclopts import App, CycloptsError

from .angles import parse_angle, parse_grid, parse_int_grid, parse_point
from .config import RunConfig, ensure_config_dir, get_config_dir, load_run_config
from .data import Dataset, RescaleRecord, generate, read_csv, rescale, write_csv
from .errors import DataError, QBayesError, SweepError, UsageError, exit_code_for
from .inference import likelihood_label_distribution
from .results import ResultRecord, Stopwatch, load_model, save_model, write_result
from .seeding import Stream, child_seeds
from .simulator import StateVector
from .sweep import (
    SweepKind,
    evaluate_model,
    evaluate_qpde,
    fit_model,
    run_experiment_sweep,
    summarize_sweep,
    write_summary_ods,
    write_sweep_csv,
)
from .training import Prediction, TrainedModel, decision_grid, qmap_classify_many

app = App(help="Quantum Bayesian learning experiments on a statevector simulator.")

_LOG_LEVELS = {
    "DEBUG": logging.DEBUG,
    "INFO": logging.INFO,
    "WARNING": logging.WARNING,
    "ERROR": logging.ERROR,
}


def _configure_logging() -> None:
    name = os.environ.get("QBAYES_LOG", "WARNING").strip().upper()
    level = _LOG_LEVELS.get(name, logging.WARNING)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    logging.getLogger("qbayes").setLevel(level)


def _load_config(
    config: Path | None, seed: int | None, shots: int | None = None, threads: int | None = None
) -> RunConfig:
    cfg = load_run_config(config)
    if seed is not None:
        cfg = cfg.with_seed(seed)
    return cfg.updated(shots=shots, threads=threads)


def _writable(path: Path, overwrite: bool) -> Path:
    if path.exists() and not overwrite:
        raise UsageError(f"Refusing to overwrite existing file: {path} (use --overwrite)")
    return path


def _snapshot(cfg: RunConfig) -> dict[str, Any]:
    return cfg.model_dump(mode="json")


def _prediction_rows(
    points: Sequence[Sequence[float]],
    predictions: Sequence[Prediction],
    truth: Sequence[int] | None,
) -> list[dict[str, Any]]:
    rows = []
    for i, (x, p) in enumerate(zip(points, predictions, strict=True)):
        row: dict[str, Any] = {
            "x": [float(v) for v in x],
            "label": p.label,
            "p0": p.p0,
            "p1": p.p1,
        }
        if truth is not None:
            row["truth"] = int(truth[i])
        rows.append(row)
    return rows


def _wavefunction_table(index: int, state: StateVector) -> pd.DataFrame:
    amps = state.amplitudes
    return pd.DataFrame(
        {
            "point": index,
            "index": np.arange(amps.shape[0]),
            "bitstring": [format(i, f"0{state.n_qubits}b") for i in range(amps.shape[0])],
            "real": amps.real,
            "imag": amps.imag,
            "magnitude": np.abs(amps),
            "phase": np.angle(amps),
        }
    )


def _write_table(df: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format="%.12g", lineterminator="\n")
    return path


def _read_split(
    path: Path, record: RescaleRecord | None = None, fit: bool = False
) -> tuple[Dataset, Dataset]:
    """The split as read, and as the model sees it."""
    raw = read_csv(path)
    if fit:
        return raw, rescale(raw)
    if record is not None:
        return raw, rescale(raw, record)
    return raw, raw


def _as_rows(features: Any) -> list[tuple[float, ...]]:
    return [tuple(float(v) for v in x) for x in features]


@app.command(name="generate", help="Generate seeded train/test dataset CSVs.")
def generate_data(
    *,
    config: Path | None = None,
    seed: int | None = None,
    out: Path | None = None,
    n_train: int | None = None,
    n_test: int | None = None,
    overwrite: bool = False,
) -> None:
    cfg = _load_config(config, seed).updated(
        "generator", n_train_per_class=n_train, n_test_per_class=n_test
    )
    train_path = _writable(cfg.output_path(cfg.output.train_csv, out), overwrite)
    test_path = _writable(cfg.output_path(cfg.output.test_csv, out), overwrite)
    train, test = generate(cfg.generator_spec())
    write_csv(train, train_path)
    write_csv(test, test_path)
    print(f"Wrote {len(train)} training samples to {train_path}")
    print(f"Wrote {len(test)} test samples to {test_path}")


@app.command(help="Train a model by QMAP (SPSA ascent on the posterior measure).")
def train(
    train_csv: Path | None = None,
    *,
    config: Path | None = None,
    seed: int | None = None,
    shots: int | None = None,
    threads: int | None = None,
    out: Path | None = None,
    iterations: int | None = None,
    eta: float | None = None,
    depth: int | None = None,
    overwrite: bool = False,
) -> None:
    watch = Stopwatch()
    cfg = _load_config(config, seed, shots, threads)
    cfg = cfg.updated("spsa", iterations=iterations, eta=eta).updated("ansatz", layers=depth)
    model_path = _writable(cfg.output_path(cfg.output.model_file, out), overwrite)
    result_path = _writable(cfg.output_path("train-result.json", out), overwrite)
    _, dataset = _read_split(
        train_csv or cfg.output_path(cfg.output.train_csv, out), fit=cfg.rescale
    )
    model = fit_model(cfg, dataset)
    _, train_accuracy = evaluate_model(model, dataset, cfg.threads)
    snapshot = _snapshot(cfg)
    save_model(model, model_path, snapshot)
    record = ResultRecord(
        command="train",
        config=snapshot,
        metrics={
            "train_accuracy": train_accuracy,
            "posterior_trace": list(model.trace),
            "evaluations": model.evaluations,
            "model_file": model_path.name,
        },
        wall_clock_seconds=watch.elapsed,
    )
    write_result(record, result_path)
    print(f"Wrote model to {model_path}")
    print(f"Training accuracy {train_accuracy:.4f}; final posterior {model.trace[-1]:.6f}")


def _points(values: list[str] | None) -> list[tuple[float, ...]]:
    return [parse_point(v) for v in values or []]


def _model_points(
    points: list[tuple[float, ...]], record: RescaleRecord | None
) -> list[tuple[float, ...]]:
    """``--point`` values in the model's feature box."""
    if not points or record is None:
        return points
    return _as_rows(record.apply_clipped(np.array(points, dtype=float)))


@app.command(help="Classify test data and/or points with a trained model.")
def predict(
    model: Path | None = None,
    test_csv: Path | None = None,
    *,
    config: Path | None = None,
    seed: int | None = None,
    shots: int | None = None,
    threads: int | None = None,
    out: Path | None = None,
    point: list[str] | None = None,
    dump_wavefunction: bool = False,
    boundary_grid: int | None = None,
    overwrite: bool = False,
) -> None:
    """``--point`` values are data coordinates and pass through the model's rescale map.

    Result rows report every point as given.
    """
    watch = Stopwatch()
    cfg = _load_config(config, seed, shots, threads)
    result_path = _writable(cfg.output_path("predict-result.json", out), overwrite)
    trained, document = load_model(model or cfg.output_path(cfg.output.model_file, out))
    extra = _points(point)
    test_path = test_csv or cfg.output_path(cfg.output.test_csv, out)
    raw_test: Dataset | None = None
    test: Dataset | None = None
    if test_csv is not None or not extra or test_path.exists():
        raw_test, test = _read_split(test_path, trained.rescale_record)
    if test is None and not extra:
        raise DataError("Nothing to classify: no test CSV and no --point given")

    test_points = _as_rows(test.features) if test is not None else []
    mapped_extra = _model_points(extra, trained.rescale_record)
    everything = test_points + mapped_extra
    seeds = child_seeds(cfg.spsa.seed, len(everything), Stream.SHOTS)
    predictions = qmap_classify_many(trained, everything, cfg.shots, seeds, cfg.threads)
    metrics: dict[str, Any] = {}
    if test is not None and raw_test is not None:
        hits = sum(
            p.label == int(t) for p, t in zip(predictions[: len(test)], test.labels, strict=True)
        )
        metrics["accuracy"] = hits / len(test)
        metrics["predictions"] = _prediction_rows(
            _as_rows(raw_test.features), predictions[: len(test)], [int(t) for t in test.labels]
        )
    if extra:
        metrics["points"] = _prediction_rows(extra, predictions[len(test_points) :], None)
    if document.trace:
        metrics["final_posterior"] = document.trace[-1]
    out_dir = cfg.output_path("", out)
    if dump_wavefunction:
        dumped = mapped_extra or test_points
        states = [
            likelihood_label_distribution(x, trained.params, trained.spec, trained.options).state
            for x in dumped
        ]
        tables = [_wavefunction_table(i, state) for i, state in enumerate(states)]
        path = _write_table(pd.concat(tables, ignore_index=True), out_dir / "wavefunctions.csv")
        metrics["wavefunction_file"] = path.name
    if boundary_grid is not None:
        metrics["boundary_file"] = _write_boundary(trained, boundary_grid, out_dir).name
    write_result(
        ResultRecord(
            command="predict",
            config=_snapshot(cfg),
            metrics=metrics,
            wall_clock_seconds=watch.elapsed,
        ),
        result_path,
    )
    if "accuracy" in metrics:
        print(f"Test accuracy {metrics['accuracy']:.4f} on {len(test_points)} samples")
    for x, p in zip(extra, predictions[len(test_points) :], strict=True):
        print(f"x*={x}: label {p.label:+d} (p0={p.p0:.4f}, p1={p.p1:.4f})")
    print(f"Wrote results to {result_path}")


def _write_boundary(model: TrainedModel, resolution: int, out_dir: Path) -> Path:
    """Decision grid over the model's box, written in data coordinates."""
    xs, ys, labels, p1 = decision_grid(model, resolution)
    gx, gy = np.meshgrid(xs, ys)
    grid = np.column_stack([gx.ravel(), gy.ravel()])
    if model.rescale_record is not None:
        grid = model.rescale_record.invert(grid)
    df = pd.DataFrame(
        {"x1": grid[:, 0], "x2": grid[:, 1], "label": labels.ravel(), "p1": p1.ravel()}
    )
    return _write_table(df, out_dir / "boundary.csv")


@app.command(help="Predict test data with the QPDE Monte-Carlo estimator.")
def qpde(
    train_csv: Path | None = None,
    test_csv: Path | None = None,
    *,
    config: Path | None = None,
    seed: int | None = None,
    shots: int | None = None,
    threads: int | None = None,
    out: Path | None = None,
    samples: int | None = None,
    interval: str | None = None,
    depth: int | None = None,
    distribution: str | None = None,
    overwrite: bool = False,
) -> None:
    watch = Stopwatch()
    cfg = _load_config(config, seed, shots, threads).updated(
        "qpde",
        n_samples=samples,
        interval=parse_angle(interval) if interval is not None else None,
        depth=depth,
        distribution=distribution,
    )
    result_path = _writable(cfg.output_path("qpde-result.json", out), overwrite)
    _, train_set = _read_split(
        train_csv or cfg.output_path(cfg.output.train_csv, out), fit=cfg.rescale
    )
    raw_test, test_set = _read_split(
        test_csv or cfg.output_path(cfg.output.test_csv, out), train_set.rescale_record
    )
    predictions, score = evaluate_qpde(cfg, train_set, test_set, cfg.threads)
    terms = predictions[0].per_sample_terms or ()
    write_result(
        ResultRecord(
            command="qpde",
            config=_snapshot(cfg),
            metrics={
                "accuracy": score,
                "posterior_weights": [w for w, _, _ in terms],
                "predictions": _prediction_rows(
                    _as_rows(raw_test.features), predictions, [int(t) for t in test_set.labels]
                ),
            },
            wall_clock_seconds=watch.elapsed,
        ),
        result_path,
    )
    print(
        f"QPDE accuracy {score:.4f} with {cfg.qpde.n_samples} samples, "
        f"interval {cfg.qpde.interval / math.pi:.3g}pi, depth {cfg.qpde.depth}"
    )
    print(f"Wrote results to {result_path}")


def _sweep_grid(kind: str, grid: str) -> Sequence[float]:
    try:
        sweep_kind = SweepKind(kind)
    except ValueError as e:
        raise UsageError(f"Unknown sweep kind '{kind}'") from e
    if sweep_kind is SweepKind.INTERVAL:
        return parse_grid(grid)
    return parse_int_grid(grid)


@app.command(help="Repeat train/test over a grid of depths, sample counts or intervals.")
def sweep(
    kind: str,
    grid: str,
    *,
    method: str = "qpde",
    repetitions: int = 10,
    train_csv: Path | None = None,
    test_csv: Path | None = None,
    config: Path | None = None,
    seed: int | None = None,
    shots: int | None = None,
    threads: int | None = None,
    out: Path | None = None,
    ods: bool = False,
    overwrite: bool = False,
) -> None:
    """Writes ``sweep.csv`` (sweep_var, value, repetition, seed, accuracy) and a JSON record.

    Without dataset CSVs every repetition generates its own data from the
    repetition seed. ``depth`` and ``samples`` grids must be integers.
    """
    watch = Stopwatch()
    cfg = _load_config(config, seed, shots, threads)
    table_path = _writable(cfg.output_path("sweep.csv", out), overwrite)
    result_path = _writable(cfg.output_path("sweep-result.json", out), overwrite)
    train_set = test_set = None
    if train_csv is not None or test_csv is not None:
        if train_csv is None or test_csv is None:
            raise UsageError("--train-csv and --test-csv must be given together")
        train_set, test_set = read_csv(train_csv), read_csv(test_csv)
    values = _sweep_grid(kind, grid)
    try:
        table = run_experiment_sweep(
            kind, values, cfg, method, repetitions, cfg.threads, train_set, test_set
        )
    except SweepError as e:
        partial = write_sweep_csv(e.partial, cfg.output_path("sweep-partial.csv", out))
        print(f"Sweep failed; wrote {len(e.partial)} finished rows to {partial}", file=sys.stderr)
        raise
    except ValueError as e:
        raise UsageError(str(e)) from e
    write_sweep_csv(table, table_path)
    summary = summarize_sweep(table)
    if ods:
        ods_path = _writable(cfg.output_path("sweep-summary.ods", out), overwrite)
        print(f"Wrote sweep summary ODS to {write_summary_ods(summary, ods_path)}")
    write_result(
        ResultRecord(
            command="sweep",
            config=_snapshot(cfg),
            metrics={
                "kind": kind,
                "method": method,
                "repetitions": repetitions,
                "summary": summary.to_dict(orient="records"),
            },
            wall_clock_seconds=watch.elapsed,
        ),
        result_path,
    )
    print(summary.to_string(index=False, float_format="%.4f"))
    print(f"Wrote {len(table)} rows to {table_path}")


@app.command(name="config-dir", help="Print the path to the configuration directory.")
def config_dir(*, create: bool = False) -> None:
    print(ensure_config_dir() if create else get_config_dir())


def main(argv: Sequence[str] | None = None) -> int:
    """Run the app and map errors to exit codes (2 usage, 3 data, 4 numerical)."""
    _configure_logging()
    try:
        app(list(argv) if argv is not None else None, exit_on_error=False)
    except CycloptsError:
        return 2
    except QBayesError as e:
        print(f"error: {e}", file=sys.stderr)
        return exit_code_for(e)
    except SystemExit as e:
        if e.code is None or isinstance(e.code, int):
            return e.code or 0
        print(e.code, file=sys.stderr)
        return 1
    return 0


def run() -> None:
    sys.exit(main())
