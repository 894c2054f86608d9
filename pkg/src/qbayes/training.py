"""QMAP training by SPSA ascent and QPDE prediction.

QMAP maximizes the posterior measure ``|<P(D|w(theta))|w(theta)>|^2`` with the
two-point SPSA gradient

    g_k = (P(theta + c_k D_k) - P(theta - c_k D_k)) / (2 c_k) * D_k,   c_k = 1 / k^a

and the ascent step ``theta <- theta + eta_k g_k``. QPDE averages the label
distribution over sampled parameters, weighted by the posterior measure.
"""

from __future__ import annotations

import itertools
import logging
import math
from collections.abc import Callable, Iterable, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any, TypeVar

import numpy as np
import numpy.typing as npt

from .ansatz import AnsatzParams, branch_states, rbm_edges
from .data import Dataset, RescaleRecord
from .encoding import FeatureMapSpec, build_label_component_states, feature_matrix
from .errors import (
    DataError,
    DegeneratePosteriorError,
    InvalidArgumentError,
    InvalidParameterError,
    NumericalError,
    ResourceLimitError,
)
from .inference import (
    Estimator,
    LikelihoodOptions,
    label_probabilities,
    likelihood_label_distribution,
    posterior_measure,
)
from .seeding import Stream, child_seeds, make_rng
from .simulator import ComplexArray, FloatArray, StateVector

__all__ = [
    "SPSAConfig",
    "QPDEDistribution",
    "QPDEConfig",
    "TrainedModel",
    "Prediction",
    "CountingObjective",
    "ansatz_layout",
    "posterior_objective",
    "spsa_gradient",
    "qmap_train",
    "qmap_classify",
    "qmap_classify_many",
    "sample_parameters",
    "qpde_predict",
    "qpde_predict_many",
    "qpde_grid_predict",
    "decision_grid",
    "accuracy",
]

logger = logging.getLogger(__name__)

Objective = Callable[[FloatArray], float]
T = TypeVar("T")
R = TypeVar("R")

MAX_GRID_POINTS = 1_000_000


@dataclass(frozen=True)
class SPSAConfig:
    """SPSA schedule. ``eta`` decays geometrically by ``eta_decay`` per iteration."""

    iterations: int = 140
    eta: float = 0.5
    eta_decay: float = 0.99
    ck_exponent: float = 0.6
    seed: int = 0
    shots: int = 0

    def __post_init__(self) -> None:
        if self.iterations < 1:
            raise InvalidParameterError(f"iterations must be >= 1, got {self.iterations}")
        if not (math.isfinite(self.eta) and self.eta >= 0):
            raise InvalidParameterError(f"eta must be >= 0, got {self.eta}")
        if not 0 < self.eta_decay <= 1:
            raise InvalidParameterError(f"eta_decay must be in (0, 1], got {self.eta_decay}")
        if not 0 < self.ck_exponent <= 1:
            raise InvalidParameterError(f"ck_exponent must be in (0, 1], got {self.ck_exponent}")
        if self.shots < 0:
            raise InvalidParameterError(f"shots must be >= 0, got {self.shots}")

    def c(self, k: int) -> float:
        return 1.0 / k**self.ck_exponent

    def step(self, k: int) -> float:
        return self.eta * self.eta_decay ** (k - 1)

    def to_dict(self) -> dict[str, Any]:
        return {
            "iterations": self.iterations,
            "eta": self.eta,
            "eta_decay": self.eta_decay,
            "ck_exponent": self.ck_exponent,
            "seed": self.seed,
            "shots": self.shots,
        }


class QPDEDistribution(StrEnum):
    UNIFORM = "uniform"
    GAUSSIAN = "gaussian"
    LAPLACIAN = "laplacian"


@dataclass(frozen=True)
class QPDEConfig:
    """Sampling plan for the predictive estimator.

    ``uniform`` draws from ``[0, interval)``; ``gaussian`` and ``laplacian``
    are centred on ``interval / 2`` with scale ``interval / 4``.
    ``n_hidden`` defaults to a single branch.
    """

    n_samples: int = 40
    interval: float = 0.2 * math.pi
    depth: int = 5
    distribution: QPDEDistribution = QPDEDistribution.UNIFORM
    seed: int = 0
    shots: int = 0
    n_hidden: int | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "distribution", QPDEDistribution(self.distribution))
        if self.n_samples < 1:
            raise InvalidParameterError(f"n_samples must be >= 1, got {self.n_samples}")
        if not (math.isfinite(self.interval) and self.interval > 0):
            raise InvalidParameterError(f"interval must be > 0, got {self.interval}")
        if self.depth < 1:
            raise InvalidParameterError(f"depth must be >= 1, got {self.depth}")
        if self.shots < 0:
            raise InvalidParameterError(f"shots must be >= 0, got {self.shots}")
        if self.n_hidden is not None and self.n_hidden < 1:
            raise InvalidParameterError(f"n_hidden must be >= 1, got {self.n_hidden}")

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_samples": self.n_samples,
            "interval": self.interval,
            "depth": self.depth,
            "distribution": str(self.distribution),
            "seed": self.seed,
            "shots": self.shots,
            "n_hidden": self.n_hidden,
        }


@dataclass(frozen=True, eq=False)
class TrainedModel:
    params: AnsatzParams
    spec: FeatureMapSpec
    trace: tuple[float, ...]
    config: SPSAConfig
    options: LikelihoodOptions = field(default_factory=LikelihoodOptions)
    rescale_record: RescaleRecord | None = None
    evaluations: int = 0


@dataclass(frozen=True)
class Prediction:
    label: int
    p0: float
    p1: float
    # (weight, p0, p1) per QPDE parameter sample
    per_sample_terms: tuple[tuple[float, float, float], ...] | None = None

    @classmethod
    def decide(
        cls,
        p0: float,
        p1: float,
        terms: tuple[tuple[float, float, float], ...] | None = None,
        warn: bool = True,
    ) -> Prediction:
        """Class -1 iff ``p0 > p1``; a tie goes to +1."""
        if p0 == p1 and warn:
            logger.warning("Label probabilities tie at %.6g; predicting +1", p0)
        return cls(-1 if p0 > p1 else 1, p0, p1, terms)


class CountingObjective:
    """Wraps an objective and counts its evaluations."""

    def __init__(self, objective: Objective) -> None:
        self._objective = objective
        self.evaluations = 0

    def __call__(self, theta: FloatArray) -> float:
        self.evaluations += 1
        return self._objective(theta)


def ansatz_layout(
    spec: FeatureMapSpec, n_hidden: int | None = None, edges: Sequence[Sequence[int]] | None = None
) -> tuple[int, tuple[tuple[int, int], ...]]:
    """Branch count and entangler edges; a single branch by default."""
    count = 1 if n_hidden is None else n_hidden
    if count < 1:
        raise InvalidParameterError(f"n_hidden must be >= 1, got {count}")
    layout = rbm_edges(spec) if edges is None else tuple((int(i), int(j)) for i, j in edges)
    return count, layout


def _check_training_data(dataset: Dataset | None) -> Dataset:
    if dataset is None or len(dataset) == 0:
        raise DataError("Training needs a non-empty labeled dataset")
    dataset.require_both_classes()
    return dataset


def posterior_objective(
    dataset: Dataset,
    template: AnsatzParams,
    spec: FeatureMapSpec,
    shots: int = 0,
    seed: int = 0,
    options: LikelihoodOptions | None = None,
) -> Objective:
    """``theta -> posterior measure`` with the dataset encoded once.

    With ``shots > 0`` each call draws a fresh swap-test seed from a stream
    seeded by ``seed``, so a run is reproducible call for call.
    """
    features = feature_matrix(spec, dataset.samples)
    seeds = make_rng(seed, Stream.SHOTS)

    def objective(theta: FloatArray) -> float:
        estimator = Estimator.from_shots(shots, int(seeds.integers(0, 2**32)))
        params = template.with_theta(theta)
        return posterior_measure(dataset, params, spec, estimator, options, features).value

    return objective


def _rademacher(rng: np.random.Generator, shape: tuple[int, ...]) -> FloatArray:
    return rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0


def _spsa_step(
    objective: Objective,
    theta: FloatArray,
    config: SPSAConfig,
    k: int,
    rng: np.random.Generator,
) -> tuple[FloatArray, float, float]:
    if k < 1:
        raise InvalidArgumentError(f"SPSA iteration index must be >= 1, got {k}")
    c_k = config.c(k)
    delta = _rademacher(rng, theta.shape)
    p_plus = objective(theta + c_k * delta)
    p_minus = objective(theta - c_k * delta)
    return (p_plus - p_minus) / (2.0 * c_k) * delta, p_plus, p_minus


def spsa_gradient(
    dataset: Dataset | None,
    params: AnsatzParams,
    config: SPSAConfig,
    k: int,
    *,
    spec: FeatureMapSpec | None = None,
    objective: Objective | None = None,
    rng: np.random.Generator | None = None,
    options: LikelihoodOptions | None = None,
) -> FloatArray:
    """Two-point SPSA estimate of the posterior-measure gradient at iteration ``k``."""
    if objective is None:
        if spec is None:
            raise InvalidArgumentError("spsa_gradient needs a feature map spec or an objective")
        objective = posterior_objective(
            _check_training_data(dataset), params, spec, config.shots, config.seed, options
        )
    rng = rng or make_rng(config.seed, Stream.SPSA_PERTURBATION)
    gradient, _, _ = _spsa_step(objective, np.array(params.theta), config, k, rng)
    return gradient


def qmap_train(
    dataset: Dataset | None,
    initial_params: AnsatzParams,
    spec: FeatureMapSpec,
    config: SPSAConfig,
    *,
    objective: Objective | None = None,
    options: LikelihoodOptions | None = None,
) -> TrainedModel:
    """SPSA ascent on the posterior measure.

    ``trace[k-1]`` is the mean of the two perturbed evaluations of iteration
    ``k``, so each iteration costs exactly two objective calls.
    """
    options = options or LikelihoodOptions()
    if objective is None:
        objective = posterior_objective(
            _check_training_data(dataset), initial_params, spec, config.shots, config.seed, options
        )
    counter = CountingObjective(objective)
    rng = make_rng(config.seed, Stream.SPSA_PERTURBATION)
    theta = np.array(initial_params.theta)
    trace: list[float] = []
    report_every = max(1, config.iterations // 10)
    for k in range(1, config.iterations + 1):
        try:
            gradient, p_plus, p_minus = _spsa_step(counter, theta, config, k, rng)
        except NumericalError as e:
            logger.error("SPSA aborted at iteration %d: %s", k, e)
            raise
        trace.append(0.5 * (p_plus + p_minus))
        theta = theta + config.step(k) * gradient
        logger.debug(
            "SPSA k=%d P+=%.6f P-=%.6f |g|=%.4g",
            k,
            p_plus,
            p_minus,
            float(np.linalg.norm(gradient)),
        )
        if k % report_every == 0 or k == config.iterations:
            logger.info("SPSA %d/%d posterior %.5f", k, config.iterations, trace[-1])
    return TrainedModel(
        params=initial_params.with_theta(theta),
        spec=spec,
        trace=tuple(trace),
        config=config,
        options=options,
        rescale_record=dataset.rescale_record if dataset is not None else None,
        evaluations=counter.evaluations,
    )


def _require_binary(spec: FeatureMapSpec) -> None:
    if spec.label_qubits != 1:
        raise InvalidParameterError(
            f"Classification needs one label qubit, feature map has {spec.label_qubits}"
        )


def qmap_classify(
    model: TrainedModel, x_star: npt.ArrayLike, shots: int = 0, seed: int = 0
) -> Prediction:
    _require_binary(model.spec)
    dist = likelihood_label_distribution(
        x_star, model.params, model.spec, model.options, shots, seed
    )
    return Prediction.decide(dist.p0, dist.p1)


def qmap_classify_many(
    model: TrainedModel,
    points: Sequence[npt.ArrayLike],
    shots: int = 0,
    seeds: Sequence[int] | None = None,
    threads: int = 1,
) -> list[Prediction]:
    """``qmap_classify`` over ``points``, in input order for any thread count."""
    if seeds is None:
        seeds = [0] * len(points)
    if len(seeds) != len(points):
        raise InvalidArgumentError(f"{len(seeds)} seeds for {len(points)} points")
    jobs = list(zip(points, seeds, strict=True))
    return _parallel_map(lambda job: qmap_classify(model, job[0], shots, job[1]), jobs, threads)


# ---------------------------------------------------------------------------
# QPDE


def _parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int) -> list[R]:
    """Ordered map, on a thread pool when ``threads > 1``."""
    if threads <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def sample_parameters(
    config: QPDEConfig, shape: tuple[int, ...], rng: np.random.Generator
) -> FloatArray:
    """``n_samples`` parameter tensors drawn from the configured ``h(theta)``."""
    size = (config.n_samples, *shape)
    centre, scale = config.interval / 2.0, config.interval / 4.0
    if config.distribution is QPDEDistribution.UNIFORM:
        return rng.uniform(0.0, config.interval, size=size)
    if config.distribution is QPDEDistribution.GAUSSIAN:
        return rng.normal(centre, scale, size=size)
    return rng.laplace(centre, scale, size=size)


@dataclass(frozen=True, eq=False)
class _Term:
    weight: float
    prior: StateVector
    branches: list[StateVector]


def _weight_term(
    dataset: Dataset,
    params: AnsatzParams,
    spec: FeatureMapSpec,
    estimator: Estimator,
    options: LikelihoodOptions,
    features: ComplexArray,
) -> _Term:
    measure = posterior_measure(dataset, params, spec, estimator, options, features)
    branches = branch_states(params)
    total = np.sum([b.amplitudes for b in branches], axis=0)
    prior = StateVector.from_amplitudes(total, normalize=True)
    return _Term(float(np.clip(measure.value, 0.0, 1.0)), prior, branches)


def _aggregate(
    terms: Sequence[_Term],
    components: ComplexArray,
    options: LikelihoodOptions,
    shots: int,
    rng: np.random.Generator,
) -> Prediction:
    weights = np.array([t.weight for t in terms])
    total = float(weights.sum())
    if total <= 0.0:
        raise DegeneratePosteriorError("Every sampled posterior weight is zero")
    per_sample = []
    for term in terms:
        probs, _ = label_probabilities(components, term.prior, term.branches, options)
        if shots > 0:
            probs = rng.multinomial(shots, probs) / shots
        per_sample.append(probs)
    table = np.array(per_sample)
    p = weights @ table / total
    records = tuple(
        (float(w), float(row[0]), float(row[1])) for w, row in zip(weights, table, strict=True)
    )
    return Prediction.decide(float(p[0]), float(p[1]), records)


def _training_features(dataset: Dataset, spec: FeatureMapSpec) -> ComplexArray:
    _check_training_data(dataset)
    return feature_matrix(spec, dataset.samples)


def qpde_predict_many(
    dataset: Dataset,
    points: Sequence[npt.ArrayLike],
    spec: FeatureMapSpec,
    config: QPDEConfig,
    options: LikelihoodOptions | None = None,
    threads: int = 1,
) -> list[Prediction]:
    """QPDE predictions for many test points sharing one set of sampled parameters.

    ``p(t) = sum_l w_l p_l(t) / sum_l w_l`` with ``w_l`` the posterior measure at
    the sampled ``z_l``. The weights do not depend on the test point.
    """
    _require_binary(spec)
    options = options or LikelihoodOptions()
    features = _training_features(dataset, spec)
    n_hidden, edges = ansatz_layout(spec, config.n_hidden)
    template = AnsatzParams.zeros(spec.n_qubits, n_hidden, config.depth, edges)
    samples = sample_parameters(
        config, template.shape, make_rng(config.seed, Stream.QPDE_SAMPLING)
    )
    seeds = child_seeds(config.seed, config.n_samples, Stream.SHOTS)

    def term(index: int) -> _Term:
        estimator = Estimator.from_shots(config.shots, seeds[index])
        params = template.with_theta(samples[index])
        return _weight_term(dataset, params, spec, estimator, options, features)

    terms = _parallel_map(term, range(config.n_samples), threads)
    logger.info(
        "QPDE: %d samples, mean posterior weight %.4g",
        config.n_samples,
        float(np.mean([t.weight for t in terms])),
    )
    label_rng = make_rng(config.seed, Stream.SHOTS)
    predictions = []
    for x_star in points:
        components = np.stack([c.amplitudes for c in build_label_component_states(spec, x_star)])
        predictions.append(_aggregate(terms, components, options, config.shots, label_rng))
    return predictions


def qpde_predict(
    dataset: Dataset,
    x_star: npt.ArrayLike,
    spec: FeatureMapSpec,
    config: QPDEConfig,
    options: LikelihoodOptions | None = None,
    threads: int = 1,
) -> Prediction:
    return qpde_predict_many(dataset, [x_star], spec, config, options, threads)[0]


def qpde_grid_predict(
    dataset: Dataset,
    x_star: npt.ArrayLike,
    spec: FeatureMapSpec,
    config: QPDEConfig,
    points_per_axis: int,
    options: LikelihoodOptions | None = None,
    threads: int = 1,
) -> Prediction:
    """Midpoint-rule quadrature of the uniform-sampling predictive sum.

    Evaluates the same weighted average as :func:`qpde_predict` on a regular
    grid over ``[0, interval)^dim`` instead of random draws. Exponential in
    the parameter count; only for small toy problems.
    """
    _require_binary(spec)
    if config.distribution is not QPDEDistribution.UNIFORM:
        raise InvalidArgumentError("Grid quadrature is defined for uniform sampling only")
    if points_per_axis < 1:
        raise InvalidArgumentError(f"points_per_axis must be >= 1, got {points_per_axis}")
    options = options or LikelihoodOptions()
    features = _training_features(dataset, spec)
    n_hidden, edges = ansatz_layout(spec, config.n_hidden)
    template = AnsatzParams.zeros(spec.n_qubits, n_hidden, config.depth, edges)
    dim = int(np.prod(template.shape))
    if points_per_axis**dim > MAX_GRID_POINTS:
        raise ResourceLimitError(
            f"{points_per_axis}^{dim} grid points exceed the limit of {MAX_GRID_POINTS}"
        )
    h = config.interval / points_per_axis
    axis = (np.arange(points_per_axis) + 0.5) * h
    exact = Estimator()

    def term(point: tuple[float, ...]) -> _Term:
        params = template.with_theta(np.reshape(point, template.shape))
        return _weight_term(dataset, params, spec, exact, options, features)

    terms = _parallel_map(term, itertools.product(axis, repeat=dim), threads)
    components = np.stack([c.amplitudes for c in build_label_component_states(spec, x_star)])
    return _aggregate(terms, components, options, 0, make_rng(config.seed, Stream.SHOTS))


# ---------------------------------------------------------------------------
# Evaluation helpers


def decision_grid(
    model: TrainedModel, resolution: int, low: float = 0.0, high: float = 2 * math.pi
) -> tuple[FloatArray, FloatArray, npt.NDArray[np.int64], FloatArray]:
    """Labels and ``p1`` on a ``resolution x resolution`` midpoint grid over a 2-D box."""
    _require_binary(model.spec)
    if model.spec.data_qubits != 2:
        raise InvalidArgumentError("Decision grids are drawn for two-feature models")
    if resolution < 1:
        raise InvalidArgumentError(f"resolution must be >= 1, got {resolution}")
    step = (high - low) / resolution
    axis = low + (np.arange(resolution) + 0.5) * step
    branches = branch_states(model.params)
    total = np.sum([b.amplitudes for b in branches], axis=0)
    prior = StateVector.from_amplitudes(total, normalize=True)
    labels = np.empty((resolution, resolution), dtype=np.int64)
    p1 = np.empty((resolution, resolution))
    for i, y in enumerate(axis):
        for j, x in enumerate(axis):
            states = build_label_component_states(model.spec, (x, y))
            components = np.stack([s.amplitudes for s in states])
            probs, _ = label_probabilities(components, prior, branches, model.options)
            decided = Prediction.decide(float(probs[0]), float(probs[1]), warn=False)
            labels[i, j] = decided.label
            p1[i, j] = decided.p1
    return axis, axis.copy(), labels, p1


def accuracy(predictions: Sequence[Prediction], labels: Iterable[int]) -> float:
    truth = list(labels)
    if len(truth) != len(predictions) or not truth:
        raise InvalidArgumentError(
            f"Need equally many predictions and labels, got {len(predictions)}/{len(truth)}"
        )
    hits = sum(p.label == int(t) for p, t in zip(predictions, truth, strict=True))
    return hits / len(truth)
