"""Datasets: synthetic generators, min-max rescaling and CSV I/O.

CSV format (UTF-8, LF line endings)::

    x1,x2,...,xd,label
    4.272566,5.08938,+1

Labels are written as ``+1``/``-1``; ``1``, ``-1`` and a unicode minus are
accepted when reading. Floats are written with 12 significant digits.

Generators draw from a PCG64 stream (:mod:`qbayes.seeding`), so a seed gives
the same dataset on every platform.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt
import pandas as pd

from .encoding import LabeledSample
from .errors import DataError, GeneratorError, ParseError, RescaleError
from .seeding import Stream, make_rng

__all__ = [
    "FEATURE_BOX",
    "GeneratorKind",
    "GeneratorSpec",
    "RescaleRecord",
    "Dataset",
    "generate",
    "rescale",
    "read_csv",
    "write_csv",
]

logger = logging.getLogger(__name__)

FEATURE_BOX = 2 * math.pi
RESCALE_GUARD = 1e-9

FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]
Draw = Callable[[np.random.Generator, int], FloatArray]

_LABEL_TOKENS: dict[str, int] = {"+1": 1, "1": 1, "-1": -1, "−1": -1}
_MAX_REJECTION_ROUNDS = 1000


class GeneratorKind(StrEnum):
    TWO_BLOBS = "two_blobs"
    ANNULUS_VS_CORE = "annulus_vs_core"
    CUSTOM_CSV = "custom_csv"


@dataclass(frozen=True)
class GeneratorSpec:
    """Synthetic data layout.

    ``two_blobs``: isotropic Gaussians at ``center_pos`` (label +1) and
    ``center_neg`` (label -1), rejection-sampled into ``[0, 2pi)^2``.
    ``annulus_vs_core``: uniform disc of radius ``core_radius`` (label -1)
    inside a uniform ring ``annulus_inner..annulus_outer`` (label +1).
    ``custom_csv``: stratified split of the labeled rows of ``csv_path``.
    """

    kind: GeneratorKind = GeneratorKind.TWO_BLOBS
    n_train_per_class: int = 400
    n_test_per_class: int = 40
    seed: int = 0
    center_pos: tuple[float, float] = (4.0, 5.4)
    center_neg: tuple[float, float] = (5.4, 3.2)
    spread: float = 0.45
    ring_center: tuple[float, float] = (math.pi, math.pi)
    core_radius: float = 0.9
    annulus_inner: float = 1.5
    annulus_outer: float = 2.4
    csv_path: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", GeneratorKind(self.kind))
        if self.n_train_per_class < 1 or self.n_test_per_class < 1:
            raise GeneratorError(
                f"Need >= 1 sample per class, got train={self.n_train_per_class} "
                f"test={self.n_test_per_class}"
            )
        if self.seed < 0:
            raise GeneratorError(f"Seed must be non-negative, got {self.seed}")
        if self.kind is GeneratorKind.TWO_BLOBS and not self.spread > 0:
            raise GeneratorError(f"Blob spread must be > 0, got {self.spread}")
        if self.kind is GeneratorKind.ANNULUS_VS_CORE and not (
            0 < self.core_radius < self.annulus_inner < self.annulus_outer
        ):
            raise GeneratorError(
                "Need 0 < core_radius < annulus_inner < annulus_outer, got "
                f"{self.core_radius}, {self.annulus_inner}, {self.annulus_outer}"
            )
        if self.kind is GeneratorKind.CUSTOM_CSV and not self.csv_path:
            raise GeneratorError("custom_csv generator needs csv_path")

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": str(self.kind),
            "n_train_per_class": self.n_train_per_class,
            "n_test_per_class": self.n_test_per_class,
            "seed": self.seed,
            "center_pos": list(self.center_pos),
            "center_neg": list(self.center_neg),
            "spread": self.spread,
            "ring_center": list(self.ring_center),
            "core_radius": self.core_radius,
            "annulus_inner": self.annulus_inner,
            "annulus_outer": self.annulus_outer,
            "csv_path": self.csv_path,
        }


@dataclass(frozen=True)
class RescaleRecord:
    """Per-feature affine map ``y = (x - offset) * scale``."""

    offsets: tuple[float, ...]
    scales: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.offsets) != len(self.scales):
            raise RescaleError(
                f"{len(self.offsets)} offsets but {len(self.scales)} scales in rescale record"
            )
        if not all(math.isfinite(s) and s > 0 for s in self.scales):
            raise RescaleError(f"Rescale factors must be finite and positive: {self.scales}")

    @property
    def dim(self) -> int:
        return len(self.offsets)

    @classmethod
    def identity(cls, dim: int) -> RescaleRecord:
        return cls((0.0,) * dim, (1.0,) * dim)

    @classmethod
    def fit(cls, features: FloatArray) -> RescaleRecord:
        """Min-max map of each column onto ``[0, 2pi * (1 - guard)]``."""
        if features.shape[0] == 0:
            raise RescaleError("Cannot fit a rescale record on an empty dataset")
        low = features.min(axis=0)
        span = features.max(axis=0) - low
        flat = [i + 1 for i, s in enumerate(span) if s <= 0]
        if flat:
            raise RescaleError(f"Feature(s) x{flat} are constant; cannot rescale")
        upper = FEATURE_BOX * (1.0 - RESCALE_GUARD)
        return cls(tuple(float(v) for v in low), tuple(float(upper / s) for s in span))

    def _check(self, features: FloatArray) -> None:
        if features.shape[1] != self.dim:
            raise RescaleError(
                f"Rescale record is for {self.dim} features, data has {features.shape[1]}"
            )

    def apply(self, features: FloatArray) -> FloatArray:
        self._check(features)
        return (features - np.asarray(self.offsets)) * np.asarray(self.scales)

    def apply_clipped(self, features: FloatArray) -> FloatArray:
        """``apply`` for data outside the fitted split, clipped into the box."""
        mapped = self.apply(features)
        upper = FEATURE_BOX * (1.0 - RESCALE_GUARD)
        outside = int(np.sum((mapped < 0.0) | (mapped > upper)))
        if outside:
            logger.info("Clipped %d feature values into [0, 2pi)", outside)
        return np.clip(mapped, 0.0, upper)

    def invert(self, features: FloatArray) -> FloatArray:
        self._check(features)
        return features / np.asarray(self.scales) + np.asarray(self.offsets)

    def to_dict(self) -> dict[str, list[float]]:
        return {"offsets": list(self.offsets), "scales": list(self.scales)}

    @classmethod
    def from_dict(cls, data: dict[str, Sequence[float]]) -> RescaleRecord:
        try:
            return cls(
                tuple(float(v) for v in data["offsets"]), tuple(float(v) for v in data["scales"])
            )
        except (KeyError, TypeError, ValueError) as e:
            raise RescaleError(f"Malformed rescale record: {e}") from e


@dataclass(frozen=True, eq=False)
class Dataset:
    features: FloatArray = field(repr=False)
    labels: IntArray = field(repr=False)
    rescale_record: RescaleRecord | None = None

    def __post_init__(self) -> None:
        features = np.array(self.features, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64).reshape(-1)
        if features.ndim != 2:
            raise DataError(f"Features must be a 2-D array, got shape {features.shape}")
        if features.shape[0] != labels.shape[0]:
            raise DataError(f"{features.shape[0]} feature rows but {labels.shape[0]} labels")
        if not np.all(np.isfinite(features)):
            raise DataError("Dataset has non-finite features")
        if not np.all(np.isin(labels, (-1, 1))):
            raise DataError(f"Labels must be -1 or +1, got {sorted(set(labels.tolist()))}")
        features.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.features.shape[0])

    @property
    def feature_dim(self) -> int:
        return int(self.features.shape[1])

    @cached_property
    def samples(self) -> list[LabeledSample]:
        return [
            LabeledSample.of(x, int(t)) for x, t in zip(self.features, self.labels, strict=True)
        ]

    def class_counts(self) -> dict[int, int]:
        return {-1: int(np.sum(self.labels == -1)), 1: int(np.sum(self.labels == 1))}

    def require_both_classes(self) -> None:
        counts = self.class_counts()
        if counts[-1] == 0 or counts[1] == 0:
            raise DataError(f"Training data needs both classes, got counts {counts}")

    def subset(self, indices: Iterable[int]) -> Dataset:
        idx = np.fromiter(indices, dtype=np.int64)
        return Dataset(self.features[idx], self.labels[idx], self.rescale_record)

    @classmethod
    def from_samples(cls, samples: Sequence[LabeledSample]) -> Dataset:
        if not samples:
            raise DataError("Cannot build a dataset from no samples")
        if any(s.x_label is None for s in samples):
            raise DataError("Every sample needs a label")
        return cls(
            np.array([s.x_data for s in samples], dtype=np.float64),
            np.array([s.x_label for s in samples], dtype=np.int64),
        )


# ---------------------------------------------------------------------------
# Generators


def _in_box(points: FloatArray) -> npt.NDArray[np.bool_]:
    return np.all((points >= 0.0) & (points < FEATURE_BOX), axis=1)


def _rejection_sample(
    draw: Draw, count: int, rng: np.random.Generator, what: str
) -> FloatArray:
    kept: list[FloatArray] = []
    have = 0
    for _ in range(_MAX_REJECTION_ROUNDS):
        batch = draw(rng, max(count - have, 16))
        batch = batch[_in_box(batch)]
        kept.append(batch)
        have += batch.shape[0]
        if have >= count:
            return np.vstack(kept)[:count]
    raise GeneratorError(f"Could not place {count} {what} points inside [0, 2pi)^2")


def _blob(center: tuple[float, float], spread: float) -> Draw:
    def draw(rng: np.random.Generator, k: int) -> FloatArray:
        return rng.normal(loc=center, scale=spread, size=(k, 2))

    return draw


def _disc(center: tuple[float, float], r_min: float, r_max: float) -> Draw:
    def draw(rng: np.random.Generator, k: int) -> FloatArray:
        # area-uniform radius
        r = np.sqrt(rng.uniform(r_min**2, r_max**2, size=k))
        a = rng.uniform(0.0, 2 * math.pi, size=k)
        return np.column_stack([center[0] + r * np.cos(a), center[1] + r * np.sin(a)])

    return draw


def _split(
    features: dict[int, FloatArray], spec: GeneratorSpec, rng: np.random.Generator
) -> tuple[Dataset, Dataset]:
    parts: dict[str, tuple[list[FloatArray], list[IntArray]]] = {
        "train": ([], []),
        "test": ([], []),
    }
    for label in (1, -1):
        rows = features[label]
        train = rows[: spec.n_train_per_class]
        test = rows[spec.n_train_per_class : spec.n_train_per_class + spec.n_test_per_class]
        for name, chunk in (("train", train), ("test", test)):
            parts[name][0].append(chunk)
            parts[name][1].append(np.full(chunk.shape[0], label, dtype=np.int64))
    out = []
    for name in ("train", "test"):
        x = np.vstack(parts[name][0])
        y = np.concatenate(parts[name][1])
        order = rng.permutation(x.shape[0])
        out.append(Dataset(x[order], y[order]))
    return out[0], out[1]


def generate(spec: GeneratorSpec | None = None) -> tuple[Dataset, Dataset]:
    """Seeded ``(train, test)`` datasets with exact class balance."""
    spec = spec or GeneratorSpec()
    rng = make_rng(spec.seed, Stream.DATA)
    per_class = spec.n_train_per_class + spec.n_test_per_class
    if spec.kind is GeneratorKind.CUSTOM_CSV:
        assert spec.csv_path is not None
        source = read_csv(spec.csv_path)
        by_label: dict[int, FloatArray] = {}
        for label in (1, -1):
            rows = source.features[source.labels == label]
            if rows.shape[0] < per_class:
                raise GeneratorError(
                    f"{spec.csv_path} has {rows.shape[0]} rows with label {label:+d}, "
                    f"need {per_class}"
                )
            by_label[label] = rows[rng.permutation(rows.shape[0])]
        logger.info(
            "Split %s into %d/%d per class",
            spec.csv_path,
            spec.n_train_per_class,
            spec.n_test_per_class,
        )
        return _split(by_label, spec, rng)
    if spec.kind is GeneratorKind.TWO_BLOBS:
        draws = {1: _blob(spec.center_pos, spec.spread), -1: _blob(spec.center_neg, spec.spread)}
    else:
        draws = {
            1: _disc(spec.ring_center, spec.annulus_inner, spec.annulus_outer),
            -1: _disc(spec.ring_center, 0.0, spec.core_radius),
        }
    by_label = {
        label: _rejection_sample(draw, per_class, rng, f"label {label:+d}")
        for label, draw in draws.items()
    }
    return _split(by_label, spec, rng)


def rescale(dataset: Dataset, record: RescaleRecord | None = None) -> Dataset:
    """Min-max rescale into ``[0, 2pi)``.

    Without ``record`` the map is fitted on ``dataset`` (the training split).
    With one, it is applied as-is and the result clipped into the box, which
    is how test data is mapped with training statistics.
    """
    if len(dataset) == 0:
        raise RescaleError("Cannot rescale an empty dataset")
    if record is None:
        record = RescaleRecord.fit(np.asarray(dataset.features))
        mapped = record.apply(np.asarray(dataset.features))
    else:
        mapped = record.apply_clipped(np.asarray(dataset.features))
    return Dataset(mapped, dataset.labels, record)


# ---------------------------------------------------------------------------
# CSV I/O


def _header(dim: int) -> list[str]:
    return [f"x{i + 1}" for i in range(dim)] + ["label"]


def _parse_float(token: Any, line: int, column: str) -> float:
    if not isinstance(token, str) or not token.strip():
        raise ParseError(f"missing value for {column}", line)
    try:
        value = float(token)
    except ValueError as e:
        raise ParseError(f"{column} is not a number: {token!r}", line) from e
    if not math.isfinite(value):
        raise ParseError(f"{column} is not finite: {token!r}", line)
    return value


def _parse_label(token: Any, line: int) -> int:
    key = token.strip() if isinstance(token, str) else ""
    if key not in _LABEL_TOKENS:
        raise ParseError(f"unknown label token {token!r} (expected +1 or -1)", line)
    return _LABEL_TOKENS[key]


def read_csv(path: str | Path) -> Dataset:
    path = Path(path)
    if not path.exists():
        raise DataError(f"Dataset file not found: {path}")
    try:
        df = pd.read_csv(
            path, dtype=str, keep_default_na=False, skip_blank_lines=False, encoding="utf-8"
        )
    except pd.errors.EmptyDataError as e:
        raise ParseError(f"{path} is empty", 1) from e
    except pd.errors.ParserError as e:
        raise ParseError(f"{path}: {e}") from e
    columns = [c.strip() for c in df.columns]
    if len(columns) < 2 or columns != _header(len(columns) - 1):
        raise ParseError(f"header must be x1,...,xd,label, got {','.join(columns)}", 1)
    df.columns = pd.Index(columns)
    feature_cols = columns[:-1]
    rows: list[list[float]] = []
    labels: list[int] = []
    for offset, record in enumerate(df.itertuples(index=False, name=None)):
        line = offset + 2
        if all((not isinstance(v, str)) or not v.strip() for v in record):
            continue
        values = zip(record[:-1], feature_cols, strict=True)
        rows.append([_parse_float(v, line, c) for v, c in values])
        labels.append(_parse_label(record[-1], line))
    if not rows:
        raise DataError(f"{path} contains no samples")
    return Dataset(np.array(rows, dtype=np.float64), np.array(labels, dtype=np.int64))


def write_csv(dataset: Dataset, path: str | Path) -> Path:
    path = Path(path)
    df = pd.DataFrame(np.asarray(dataset.features), columns=_header(dataset.feature_dim)[:-1])
    df["label"] = ["+1" if t == 1 else "-1" for t in dataset.labels]
    path.parent.mkdir(parents=True, exist_ok=True)
    df.to_csv(path, index=False, float_format="%.12g", lineterminator="\n", encoding="utf-8")
    return path
