"""Configuration for qbayes runs.

Centralizes locating and loading the run configuration (``run_config.toml``)
and the :class:`RunConfig` record every command is driven by.

Default location follows the XDG base directory spec using
``$XDG_CONFIG_HOME/qbayes`` or ``~/.config/qbayes`` when the environment
variable is not set.

Environment overrides:
    * ``QBAYES_CONFIG_DIR``: override the config directory root (useful for tests)

Resolution order for a run: explicit ``--config`` path, then
``run_config.toml`` in the config directory, then built-in defaults.
"""

from __future__ import annotations

import math
import os
import tomllib
from pathlib import Path
from typing import Annotated, Any

from pydantic import BaseModel, BeforeValidator, ConfigDict, Field, ValidationError, field_validator

from .angles import parse_angle
from .ansatz import AnsatzParams
from .data import GeneratorKind, GeneratorSpec
from .encoding import PHI_FAMILIES, FeatureMapSpec
from .errors import ConfigError, QBayesError
from .inference import LabelRule, LikelihoodOptions
from .seeding import Stream, make_rng
from .training import QPDEConfig, QPDEDistribution, SPSAConfig, ansatz_layout

__all__ = [
    "get_config_dir",
    "ensure_config_dir",
    "get_run_config_path",
    "load_run_config",
    "RunConfig",
]

RUN_CONFIG_NAME = "run_config.toml"


def get_config_dir() -> Path:
    override = os.environ.get("QBAYES_CONFIG_DIR")
    if override:
        return Path(override)
    xdg = os.environ.get("XDG_CONFIG_HOME")
    base = Path(xdg) if xdg else Path.home() / ".config"
    return base / "qbayes"


def ensure_config_dir() -> Path:
    cfg = get_config_dir()
    cfg.mkdir(parents=True, exist_ok=True)
    return cfg


def get_run_config_path() -> Path:
    return get_config_dir() / RUN_CONFIG_NAME


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _angle(value: Any) -> Any:
    if isinstance(value, str):
        try:
            return parse_angle(value)
        except QBayesError as e:
            raise ValueError(str(e)) from e
    return value


Angle = Annotated[float, BeforeValidator(_angle)]


class FeatureMapSection(_Section):
    data_qubits: int = Field(2, ge=1)
    label_qubits: int = Field(1, ge=1)
    hidden_qubits: int = Field(3, ge=0)
    repetitions: int = Field(2, ge=1)
    phi_family: str = "pi_product"
    kernel_power: int = Field(1, ge=1, le=2)
    label_rule: LabelRule = LabelRule.CONDITIONAL

    @field_validator("phi_family")
    @classmethod
    def _known_family(cls, value: str) -> str:
        if value not in PHI_FAMILIES:
            known = sorted(PHI_FAMILIES)
            raise ValueError(f"unknown phi family '{value}', expected one of {known}")
        return value


class AnsatzSection(_Section):
    n_hidden: int | None = Field(None, ge=1)
    layers: int = Field(10, ge=1)
    edges: list[tuple[int, int]] | None = None
    init_interval: Angle = Field(2 * math.pi, gt=0)
    seed: int = Field(0, ge=0)


class SPSASection(_Section):
    iterations: int = Field(140, ge=1)
    eta: float = Field(0.5, ge=0)
    eta_decay: float = Field(0.99, gt=0, le=1)
    ck_exponent: float = Field(0.6, gt=0, le=1)
    seed: int = Field(0, ge=0)


class QPDESection(_Section):
    n_samples: int = Field(40, ge=1)
    interval: Angle = Field(0.2 * math.pi, gt=0)
    depth: int = Field(5, ge=1)
    distribution: QPDEDistribution = QPDEDistribution.UNIFORM
    seed: int = Field(0, ge=0)
    n_hidden: int | None = Field(None, ge=1)


class GeneratorSection(_Section):
    kind: GeneratorKind = GeneratorKind.TWO_BLOBS
    n_train_per_class: int = Field(400, ge=1)
    n_test_per_class: int = Field(40, ge=1)
    seed: int = Field(0, ge=0)
    center_pos: tuple[float, float] = (4.0, 5.4)
    center_neg: tuple[float, float] = (5.4, 3.2)
    spread: float = Field(0.45, gt=0)
    ring_center: tuple[float, float] = (math.pi, math.pi)
    core_radius: float = 0.9
    annulus_inner: float = 1.5
    annulus_outer: float = 2.4
    csv_path: str | None = None


class OutputSection(_Section):
    directory: str = "results"
    train_csv: str = "train.csv"
    test_csv: str = "test.csv"
    model_file: str = "model.json"


class RunConfig(_Section):
    """Every hyperparameter of a run; each field has a default and unknown keys are rejected."""

    feature_map: FeatureMapSection = FeatureMapSection()
    ansatz: AnsatzSection = AnsatzSection()
    spsa: SPSASection = SPSASection()
    qpde: QPDESection = QPDESection()
    generator: GeneratorSection = GeneratorSection()
    output: OutputSection = OutputSection()
    shots: int = Field(0, ge=0)
    threads: int = Field(1, ge=1)
    rescale: bool = True

    @classmethod
    def from_mapping(cls, data: dict[str, Any]) -> RunConfig:
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(f"Invalid run configuration: {e}") from e

    def updated(self, section: str | None = None, **values: Any) -> RunConfig:
        """Copy with ``values`` replaced at top level or inside ``section``, revalidated."""
        data = self.model_dump()
        target = data if section is None else data[section]
        target.update({k: v for k, v in values.items() if v is not None})
        return RunConfig.from_mapping(data)

    def with_seed(self, seed: int) -> RunConfig:
        """Reseed every stream; the streams stay independent through their stream tags."""
        data = self.model_dump()
        for section in ("generator", "ansatz", "spsa", "qpde"):
            data[section]["seed"] = seed
        return RunConfig.from_mapping(data)

    def feature_map_spec(self) -> FeatureMapSpec:
        fm = self.feature_map
        return FeatureMapSpec(
            data_qubits=fm.data_qubits,
            label_qubits=fm.label_qubits,
            hidden_qubits=fm.hidden_qubits,
            repetitions=fm.repetitions,
            phi_family=fm.phi_family,
        )

    def likelihood_options(self) -> LikelihoodOptions:
        return LikelihoodOptions(self.feature_map.kernel_power, self.feature_map.label_rule)

    def spsa_config(self) -> SPSAConfig:
        return SPSAConfig(**self.spsa.model_dump(), shots=self.shots)

    def qpde_config(self) -> QPDEConfig:
        return QPDEConfig(**self.qpde.model_dump(), shots=self.shots)

    def generator_spec(self) -> GeneratorSpec:
        return GeneratorSpec(**self.generator.model_dump())

    def initial_params(self) -> AnsatzParams:
        spec = self.feature_map_spec()
        n_hidden, edges = ansatz_layout(spec, self.ansatz.n_hidden, self.ansatz.edges)
        rng = make_rng(self.ansatz.seed, Stream.ANSATZ_INIT)
        return AnsatzParams.random(
            spec.n_qubits, n_hidden, self.ansatz.layers, rng, edges, self.ansatz.init_interval
        )

    def output_path(self, name: str, out: Path | None = None) -> Path:
        return (out or Path(self.output.directory)) / name


def load_run_config(path: Path | None = None) -> RunConfig:
    if path is not None:
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
    else:
        path = get_run_config_path()
        if not path.exists():
            return RunConfig()
    try:
        data = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"Invalid TOML in {path}: {e}") from e
    return RunConfig.from_mapping(data)
