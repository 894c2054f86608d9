"""Model files and result records.

Both are single JSON documents carrying ``schema_version``. A result record
embeds the full :class:`~qbayes.config.RunConfig` snapshot, which together with
its seeds is enough to rerun the command.
"""

from __future__ import annotations

import json
import time
from pathlib import Path
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import __version__
from .ansatz import AnsatzParams
from .data import RescaleRecord
from .encoding import FeatureMapSpec
from .errors import InvalidParameterError, UsageError
from .inference import LabelRule, LikelihoodOptions
from .training import SPSAConfig, TrainedModel

__all__ = [
    "SCHEMA_VERSION",
    "ModelDocument",
    "ResultRecord",
    "save_model",
    "load_model",
    "write_result",
    "Stopwatch",
]

SCHEMA_VERSION = 1


class ModelDocument(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: int = SCHEMA_VERSION
    library_version: str = __version__
    feature_map: dict[str, Any]
    ansatz: dict[str, Any]
    spsa: dict[str, Any]
    likelihood: dict[str, Any]
    rescale: dict[str, list[float]] | None = None
    trace: list[float] = Field(default_factory=list)
    evaluations: int = 0
    config: dict[str, Any] = Field(default_factory=dict)

    @classmethod
    def from_model(cls, model: TrainedModel, config: dict[str, Any]) -> ModelDocument:
        record = model.rescale_record
        return cls(
            feature_map=model.spec.to_dict(),
            ansatz=model.params.to_dict(),
            spsa=model.config.to_dict(),
            likelihood={
                "kernel_power": model.options.kernel_power,
                "label_rule": str(model.options.label_rule),
            },
            rescale=record.to_dict() if record is not None else None,
            trace=list(model.trace),
            evaluations=model.evaluations,
            config=config,
        )

    def to_model(self) -> TrainedModel:
        try:
            spec = FeatureMapSpec(**self.feature_map)
            params = AnsatzParams.from_dict(self.ansatz)
            options = LikelihoodOptions(
                int(self.likelihood["kernel_power"]), LabelRule(self.likelihood["label_rule"])
            )
            spsa = SPSAConfig(**self.spsa)
        except (KeyError, TypeError, ValueError) as e:
            raise InvalidParameterError(f"Malformed model document: {e}") from e
        return TrainedModel(
            params=params,
            spec=spec,
            trace=tuple(self.trace),
            config=spsa,
            options=options,
            rescale_record=RescaleRecord.from_dict(self.rescale) if self.rescale else None,
            evaluations=self.evaluations,
        )


class ResultRecord(BaseModel):
    model_config = ConfigDict(extra="forbid")

    schema_version: int = SCHEMA_VERSION
    command: str
    config: dict[str, Any]
    metrics: dict[str, Any] = Field(default_factory=dict)
    wall_clock_seconds: float = 0.0
    library_version: str = __version__


def _write_json(payload: BaseModel, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(payload.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def save_model(model: TrainedModel, path: Path, config: dict[str, Any]) -> Path:
    return _write_json(ModelDocument.from_model(model, config), path)


def load_model(path: Path) -> tuple[TrainedModel, ModelDocument]:
    if not path.exists():
        raise UsageError(f"Model file not found: {path}")
    try:
        document = ModelDocument.model_validate(json.loads(path.read_text(encoding="utf-8")))
    except (json.JSONDecodeError, ValidationError) as e:
        raise UsageError(f"Invalid model file {path}: {e}") from e
    if document.schema_version != SCHEMA_VERSION:
        raise UsageError(
            f"Model file {path} has schema version {document.schema_version}, "
            f"expected {SCHEMA_VERSION}"
        )
    return document.to_model(), document


def write_result(record: ResultRecord, path: Path) -> Path:
    return _write_json(record, path)


class Stopwatch:
    """Wall-clock timer for result records."""

    def __init__(self) -> None:
        self._start = time.perf_counter()

    @property
    def elapsed(self) -> float:
        return time.perf_counter() - self._start
