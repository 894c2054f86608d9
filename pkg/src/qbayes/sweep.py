"""Experiment pipeline and seeded sweeps.

A sweep varies one setting over a grid and repeats train+test (QMAP) or
predict-all (QPDE) for each value. Repetition ``r`` runs with every seed set
to ``base + r``; results are collected in job order, never completion order.
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from concurrent.futures import Future, ThreadPoolExecutor
from enum import StrEnum
from pathlib import Path
from typing import Any

import pandas as pd

from .config import RunConfig
from .data import Dataset, generate, rescale
from .errors import InvalidArgumentError, QBayesError, SweepError
from .training import (
    Prediction,
    TrainedModel,
    accuracy,
    qmap_classify_many,
    qmap_train,
    qpde_predict_many,
)

__all__ = [
    "SweepKind",
    "Method",
    "SWEEP_COLUMNS",
    "prepare_datasets",
    "fit_model",
    "evaluate_model",
    "evaluate_qpde",
    "configure_sweep",
    "run_experiment_sweep",
    "summarize_sweep",
    "write_sweep_csv",
    "write_summary_ods",
]

logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ["sweep_var", "value", "repetition", "seed", "accuracy"]
SUMMARY_COLUMNS = ["sweep_var", "value", "mean", "std", "min", "max", "repetitions"]


class SweepKind(StrEnum):
    DEPTH = "depth"
    SAMPLES = "samples"
    INTERVAL = "interval"


class Method(StrEnum):
    QMAP = "qmap"
    QPDE = "qpde"


def prepare_datasets(
    config: RunConfig, train: Dataset | None = None, test: Dataset | None = None
) -> tuple[Dataset, Dataset]:
    """Generate whatever split is missing, then rescale with training statistics if enabled."""
    if train is None or test is None:
        generated_train, generated_test = generate(config.generator_spec())
        train = train if train is not None else generated_train
        test = test if test is not None else generated_test
    if config.rescale:
        train = rescale(train)
        test = rescale(test, train.rescale_record)
    return train, test


def fit_model(config: RunConfig, train: Dataset) -> TrainedModel:
    return qmap_train(
        train,
        config.initial_params(),
        config.feature_map_spec(),
        config.spsa_config(),
        options=config.likelihood_options(),
    )


def evaluate_model(
    model: TrainedModel, test: Dataset, threads: int = 1
) -> tuple[list[Prediction], float]:
    predictions = qmap_classify_many(model, list(test.features), threads=threads)
    return predictions, accuracy(predictions, test.labels)


def evaluate_qpde(
    config: RunConfig, train: Dataset, test: Dataset, threads: int = 1
) -> tuple[list[Prediction], float]:
    predictions = qpde_predict_many(
        train,
        list(test.features),
        config.feature_map_spec(),
        config.qpde_config(),
        config.likelihood_options(),
        threads,
    )
    return predictions, accuracy(predictions, test.labels)


def configure_sweep(base: RunConfig, kind: SweepKind, method: Method, value: float) -> RunConfig:
    """``base`` with the swept setting replaced by ``value``."""
    if kind is SweepKind.DEPTH:
        if value != int(value) or value < 1:
            raise InvalidArgumentError(f"Depth must be a positive integer, got {value}")
        if method is Method.QMAP:
            return base.updated("ansatz", layers=int(value))
        return base.updated("qpde", depth=int(value))
    if method is Method.QMAP:
        raise InvalidArgumentError(f"A {kind} sweep applies to the qpde method only")
    if kind is SweepKind.SAMPLES:
        if value != int(value) or value < 1:
            raise InvalidArgumentError(f"Sample count must be a positive integer, got {value}")
        return base.updated("qpde", n_samples=int(value))
    return base.updated("qpde", interval=float(value))


def _run_job(
    config: RunConfig, method: Method, train: Dataset | None, test: Dataset | None
) -> float:
    train_split, test_split = prepare_datasets(config, train, test)
    if method is Method.QMAP:
        model = fit_model(config, train_split)
        return evaluate_model(model, test_split)[1]
    return evaluate_qpde(config, train_split, test_split)[1]


def run_experiment_sweep(
    kind: SweepKind | str,
    grid: Sequence[float],
    base_config: RunConfig,
    method: Method | str = Method.QPDE,
    repetitions: int = 10,
    threads: int = 1,
    train: Dataset | None = None,
    test: Dataset | None = None,
) -> pd.DataFrame:
    """Long-format table with one row per (grid value, repetition).

    The base seed is the generator seed of ``base_config``. Without ``train``
    and ``test`` every repetition draws its own dataset. On failure a
    :class:`SweepError` carries the rows finished so far.
    """
    kind, method = SweepKind(kind), Method(method)
    if not grid:
        raise InvalidArgumentError("Sweep grid is empty")
    if repetitions < 1:
        raise InvalidArgumentError(f"repetitions must be >= 1, got {repetitions}")
    base_seed = base_config.generator.seed
    jobs: list[tuple[float, int, RunConfig]] = []
    for value in grid:
        configured = configure_sweep(base_config, kind, method, value)
        for r in range(repetitions):
            jobs.append((value, r, configured.with_seed(base_seed + r)))
    logger.info("Sweep %s/%s: %d jobs on %d thread(s)", kind, method, len(jobs), threads)

    def row(index: int, score: float) -> dict[str, Any]:
        value, r, _ = jobs[index]
        return {
            "sweep_var": str(kind),
            "value": value,
            "repetition": r,
            "seed": base_seed + r,
            "accuracy": score,
        }

    rows: list[dict[str, Any]] = []
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futures: list[Future[float]] = [
            pool.submit(_run_job, cfg, method, train, test) for _, _, cfg in jobs
        ]
        for index, future in enumerate(futures):
            try:
                score = future.result()
            except QBayesError as e:
                for pending in futures[index + 1 :]:
                    pending.cancel()
                finished = [
                    row(i, f.result())
                    for i, f in enumerate(futures)
                    if i != index and not f.cancelled() and f.exception() is None
                ]
                partial = pd.DataFrame(finished, columns=SWEEP_COLUMNS)
                value, r, _ = jobs[index]
                raise SweepError(
                    f"Sweep failed at {kind}={value} repetition {r}: {e}", partial, e
                ) from e
            rows.append(row(index, score))
            value, r, _ = jobs[index]
            logger.info("Sweep %s=%s rep %d accuracy %.4f", kind, value, r, score)
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def summarize_sweep(table: pd.DataFrame) -> pd.DataFrame:
    """Mean, spread and range of accuracy per grid value."""
    if table.empty:
        return pd.DataFrame(columns=SUMMARY_COLUMNS)
    return (
        table.groupby(["sweep_var", "value"], sort=False)["accuracy"]
        .agg(mean="mean", std="std", min="min", max="max", repetitions="count")
        .reset_index()[SUMMARY_COLUMNS]
    )


def write_sweep_csv(table: pd.DataFrame, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, index=False, float_format="%.12g", lineterminator="\n")
    return path


def write_summary_ods(summary: pd.DataFrame, out_path: Path) -> Path:
    """Write the sweep summary to an OpenDocument Spreadsheet (.ods)."""
    try:
        with pd.ExcelWriter(out_path, engine="odf") as writer:
            summary.to_excel(writer, index=False, sheet_name="Sweep summary")
    except Exception as e:  # noqa: BLE001
        raise RuntimeError(f"Failed to write ODS file '{out_path}': {e}") from e
    return out_path
