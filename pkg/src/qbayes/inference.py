"""Likelihood state, posterior measure and overlap estimation.

The likelihood state is assembled the classical-hybrid way: the overlaps
``K(x_l, w_p) = |<Phi(x_l)|w_p>|`` are estimated (exactly or by swap test),
kept in memory, and the state

    |P(D|w)> = sum_l P(x_l|w) |Phi(x_l)>_tr / norm,   P(x_l|w) = prod_p exp(-K(x_l, w_p))

is built directly. ``norm`` is the true Euclidean norm of the sum, since
feature states are generally not orthogonal. The posterior measure is
``|<P(D|w)|w>|^2``.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from typing import TYPE_CHECKING

import numpy as np
import numpy.typing as npt

from .ansatz import AnsatzParams, branch_states
from .encoding import (
    FeatureMapSpec,
    build_feature_state_test,
    build_label_component_states,
    feature_matrix,
)
from .errors import (
    DataError,
    DegenerateAnsatzError,
    DegenerateLikelihoodError,
    DimensionError,
    InvalidArgumentError,
    InvalidParameterError,
)
from .seeding import Stream, child_seeds, make_rng
from .simulator import (
    Circuit,
    ComplexArray,
    FloatArray,
    Gate,
    StateVector,
    apply_circuit,
    inner_product,
    measure_probabilities,
    random_state,
    sample_measurements,
)

if TYPE_CHECKING:
    from .data import Dataset

__all__ = [
    "OverlapMethod",
    "LabelRule",
    "OverlapEstimate",
    "Estimator",
    "LikelihoodOptions",
    "LikelihoodState",
    "PosteriorMeasure",
    "LabelDistribution",
    "overlap_exact",
    "swap_test_circuit",
    "swap_test",
    "build_likelihood_state",
    "posterior_measure",
    "posterior_of_states",
    "haar_posterior_mean",
    "label_marginal",
    "likelihood_label_distribution",
    "label_probabilities",
]

logger = logging.getLogger(__name__)

_DEGENERATE_NORM = 1e-12


class OverlapMethod(StrEnum):
    EXACT = "exact"
    SWAP_TEST = "swap_test"


class LabelRule(StrEnum):
    CONDITIONAL = "conditional"
    OVERLAP = "overlap"
    LIKELIHOOD = "likelihood"


@dataclass(frozen=True)
class OverlapEstimate:
    value: float  # |<a|b>|
    method: OverlapMethod
    fidelity: float  # |<a|b>|^2
    shots: int = 0
    std_error: float = 0.0
    fidelity_std_error: float = 0.0
    clamped: bool = False


@dataclass(frozen=True)
class Estimator:
    """How overlaps are obtained: exact summation, or swap tests with ``shots`` shots."""

    method: OverlapMethod = OverlapMethod.EXACT
    shots: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.method is OverlapMethod.SWAP_TEST and self.shots < 1:
            raise InvalidArgumentError("Swap-test estimator needs shots >= 1")
        if self.method is OverlapMethod.EXACT and self.shots != 0:
            raise InvalidArgumentError("Exact estimator takes no shots")

    @classmethod
    def from_shots(cls, shots: int, seed: int = 0) -> Estimator:
        if shots < 0:
            raise InvalidArgumentError(f"shots must be >= 0, got {shots}")
        if shots == 0:
            return cls(seed=seed)
        return cls(OverlapMethod.SWAP_TEST, shots, seed)

    def reseeded(self, seed: int) -> Estimator:
        return Estimator(self.method, self.shots, seed)


@dataclass(frozen=True)
class LikelihoodOptions:
    """``kernel_power`` 2 uses ``K^2`` in the exponent; ``label_rule`` picks the test-point rule."""

    kernel_power: int = 1
    label_rule: LabelRule = LabelRule.CONDITIONAL

    def __post_init__(self) -> None:
        if self.kernel_power not in (1, 2):
            raise InvalidParameterError(f"kernel_power must be 1 or 2, got {self.kernel_power}")


@dataclass(frozen=True, eq=False)
class LikelihoodState:
    state: StateVector
    per_sample_weights: FloatArray = field(repr=False)
    normalizer: float
    overlaps: FloatArray = field(repr=False)  # K, shape (N, n_hidden)


@dataclass(frozen=True)
class PosteriorMeasure:
    value: float
    std_error: float = 0.0
    likelihood: LikelihoodState | None = field(default=None, repr=False, compare=False)


@dataclass(frozen=True, eq=False)
class LabelDistribution:
    probabilities: FloatArray
    state: StateVector = field(repr=False)
    degenerate: bool = False

    @property
    def p0(self) -> float:
        return float(self.probabilities[0])

    @property
    def p1(self) -> float:
        return float(self.probabilities[1])


# ---------------------------------------------------------------------------
# Overlap estimators


def overlap_exact(a: StateVector, b: StateVector) -> OverlapEstimate:
    value = abs(inner_product(a, b))
    return OverlapEstimate(value=value, method=OverlapMethod.EXACT, fidelity=value * value)


def swap_test_circuit(n_qubits: int) -> Circuit:
    """Ancilla qubit 0, register A on ``1..n``, register B on ``n+1..2n``."""
    total = 2 * n_qubits + 1
    swaps: list[Gate] = []
    for k in range(1, n_qubits + 1):
        a, b = k, k + n_qubits
        swaps += [Gate.cnot(a, b), Gate.cnot(b, a), Gate.cnot(a, b)]
    controlled_swap = Gate.controlled([0], Circuit.of(total, swaps))
    return Circuit.of(total, [Gate.h(0), controlled_swap, Gate.h(0)])


def swap_test(a: StateVector, b: StateVector, shots: int, seed: int) -> OverlapEstimate:
    """Sampled swap test; ``p(ancilla=0) = (1 + |<a|b>|^2) / 2``."""
    if a.n_qubits != b.n_qubits:
        raise DimensionError(f"Swap test of {a.n_qubits}- and {b.n_qubits}-qubit states")
    if shots < 1:
        raise InvalidArgumentError(f"shots must be >= 1, got {shots}")
    joint = StateVector.zero(1).tensor(a).tensor(b)
    out = apply_circuit(joint, swap_test_circuit(a.n_qubits))
    counts = sample_measurements(out, [0], shots, seed)
    p0 = counts.get(0, 0) / shots
    fidelity = 2.0 * p0 - 1.0
    clamped = fidelity < 0.0
    if clamped:
        logger.warning("Swap-test fidelity estimate %.3g clamped to 0 (shots=%d)", fidelity, shots)
        fidelity = 0.0
    fidelity_std = 2.0 * math.sqrt(p0 * (1.0 - p0) / shots)
    value = math.sqrt(fidelity)
    std = fidelity_std / (2.0 * value) if value > 0 else math.sqrt(fidelity_std)
    return OverlapEstimate(
        value=value,
        method=OverlapMethod.SWAP_TEST,
        fidelity=fidelity,
        shots=shots,
        std_error=std,
        fidelity_std_error=fidelity_std,
        clamped=clamped,
    )


def _overlap_matrix(
    rows: ComplexArray, columns: Sequence[StateVector], estimator: Estimator
) -> FloatArray:
    """``|<row_i|col_j>|`` for every pair, exact or by swap test."""
    if estimator.method is OverlapMethod.EXACT:
        cols = np.stack([c.amplitudes for c in columns], axis=1)
        return np.abs(rows.conj() @ cols)
    seeds = child_seeds(estimator.seed, rows.shape[0] * len(columns), Stream.SHOTS)
    out = np.empty((rows.shape[0], len(columns)))
    for i, row in enumerate(rows):
        state = StateVector.from_amplitudes(row)
        for j, col in enumerate(columns):
            seed = seeds[i * len(columns) + j]
            out[i, j] = swap_test(state, col, estimator.shots, seed).value
    return out


# ---------------------------------------------------------------------------
# Likelihood and posterior


def _checked_features(
    dataset: Dataset, params: AnsatzParams, spec: FeatureMapSpec, features: ComplexArray | None
) -> ComplexArray:
    if len(dataset) == 0:
        raise DataError("Likelihood state needs a non-empty dataset")
    if any(s.x_label is None for s in dataset.samples):
        raise DataError("Likelihood state needs every sample to be labeled")
    if params.n_qubits != spec.n_qubits:
        raise DimensionError(
            f"Ansatz is on {params.n_qubits} qubits, feature map on {spec.n_qubits}"
        )
    if features is None:
        features = feature_matrix(spec, dataset.samples)
    if features.shape != (len(dataset), 1 << spec.n_qubits):
        raise DimensionError(f"Feature matrix shape {features.shape} does not match dataset")
    return features


def _likelihood_from_branches(
    features: ComplexArray,
    branches: Sequence[StateVector],
    estimator: Estimator,
    options: LikelihoodOptions,
) -> LikelihoodState:
    overlaps = _overlap_matrix(features, branches, estimator)
    weights = np.exp(-(overlaps**options.kernel_power)).prod(axis=1)
    combined = weights @ features
    norm = float(np.linalg.norm(combined))
    if norm < _DEGENERATE_NORM:
        raise DegenerateLikelihoodError("Weighted feature states cancel; likelihood has zero norm")
    n = int(features.shape[1]).bit_length() - 1
    return LikelihoodState(StateVector(n, combined / norm), weights, norm, overlaps)


def build_likelihood_state(
    dataset: Dataset,
    params: AnsatzParams,
    spec: FeatureMapSpec,
    estimator: Estimator | None = None,
    options: LikelihoodOptions | None = None,
    features: ComplexArray | None = None,
) -> LikelihoodState:
    """QCL subroutine: weighted superposition of the training feature states."""
    features = _checked_features(dataset, params, spec, features)
    return _likelihood_from_branches(
        features, branch_states(params), estimator or Estimator(), options or LikelihoodOptions()
    )


def _weight_from_branches(n_qubits: int, branches: Sequence[StateVector]) -> StateVector:
    total = np.sum([b.amplitudes for b in branches], axis=0)
    norm = float(np.linalg.norm(total))
    if norm < _DEGENERATE_NORM:
        raise DegenerateAnsatzError("Ansatz branches cancel; weight state has zero norm")
    return StateVector(n_qubits, total / norm)


def posterior_measure(
    dataset: Dataset,
    params: AnsatzParams,
    spec: FeatureMapSpec,
    estimator: Estimator | None = None,
    options: LikelihoodOptions | None = None,
    features: ComplexArray | None = None,
) -> PosteriorMeasure:
    """``Tr(rho(Phi(D)|w) rho(w)) = |<P(D|w)|w>|^2``."""
    estimator = estimator or Estimator()
    features = _checked_features(dataset, params, spec, features)
    branches = branch_states(params)
    weight = _weight_from_branches(params.n_qubits, branches)
    kernel_seed, posterior_seed = child_seeds(estimator.seed, 2, Stream.SHOTS)
    likelihood = _likelihood_from_branches(
        features, branches, estimator.reseeded(kernel_seed), options or LikelihoodOptions()
    )
    if estimator.method is OverlapMethod.EXACT:
        return PosteriorMeasure(posterior_of_states(likelihood.state, weight), 0.0, likelihood)
    est = swap_test(likelihood.state, weight, estimator.shots, posterior_seed)
    return PosteriorMeasure(min(est.fidelity, 1.0), est.fidelity_std_error, likelihood)


def posterior_of_states(likelihood: StateVector, weight: StateVector) -> float:
    return min(abs(inner_product(likelihood, weight)) ** 2, 1.0)


def haar_posterior_mean(
    dataset: Dataset,
    spec: FeatureMapSpec,
    n_states: int,
    seed: int,
    options: LikelihoodOptions | None = None,
) -> tuple[float, float]:
    """Mean and standard error of the posterior measure over Haar-random priors.

    Each random ``|w>`` serves as the single ansatz branch and as the prior,
    so the likelihood state is rebuilt per draw. With one training sample the
    mean is ``1 / 2^n``; larger datasets pull it below that.
    """
    if n_states < 2:
        raise InvalidArgumentError(f"Need at least two random states, got {n_states}")
    options = options or LikelihoodOptions()
    features = feature_matrix(spec, dataset.samples)
    rng = make_rng(seed)
    values = np.empty(n_states)
    for i in range(n_states):
        weight = random_state(spec.n_qubits, rng)
        likelihood = _likelihood_from_branches(features, [weight], Estimator(), options)
        values[i] = posterior_of_states(likelihood.state, weight)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(n_states))


# ---------------------------------------------------------------------------
# Label distribution for a test point


def label_marginal(weight: StateVector, n_labels: int) -> FloatArray:
    """Label-register marginal of ``weight``; the label register holds the low bits."""
    return (np.abs(weight.amplitudes.reshape(-1, n_labels)) ** 2).sum(axis=0)


def label_probabilities(
    components: ComplexArray,
    weight: StateVector,
    branches: Sequence[StateVector],
    options: LikelihoodOptions,
) -> tuple[FloatArray, ComplexArray]:
    """Label-register probabilities and the unnormalized QCL state.

    ``components`` holds ``|Phi(x*, t)>`` row-wise. The rows are orthonormal
    (they differ in the label register), so the Born-rule label marginal is
    ``|c_t|^2 / sum |c|^2``.

    The conditional rule divides each overlap by the norm of the prior's
    label-``t`` block, so a label register the prior leaves unentangled
    reads out as the test state's uniform ``|+>``. An empty block makes the
    result degenerate.
    """
    n_labels = components.shape[0]
    uniform = np.full(n_labels, 1.0 / n_labels)
    if options.label_rule is LabelRule.LIKELIHOOD:
        overlaps = _overlap_matrix(components, branches, Estimator())
        scale = 1.0 / math.sqrt(n_labels)
        coefficients = scale * np.exp(-(overlaps**options.kernel_power)).prod(axis=1)
    else:
        coefficients = components.conj() @ weight.amplitudes
        if options.label_rule is LabelRule.CONDITIONAL:
            marginal = label_marginal(weight, n_labels)
            if float(marginal.min()) < _DEGENERATE_NORM:
                return uniform, np.zeros(0, complex)
            coefficients = coefficients / np.sqrt(marginal)
    squared = np.abs(coefficients) ** 2
    total = float(squared.sum())
    if total < _DEGENERATE_NORM**2:
        return uniform, np.zeros(0, complex)
    return squared / total, coefficients @ components


def likelihood_label_distribution(
    x_star: npt.ArrayLike,
    params: AnsatzParams,
    spec: FeatureMapSpec,
    options: LikelihoodOptions | None = None,
    shots: int = 0,
    seed: int = 0,
) -> LabelDistribution:
    """QCL state of a single test point, measured on the label register.

    The test state ``|Phi(x*)>_te`` is split into its label components
    ``|Phi(x*, t)>`` and each one is reweighted against the prior. If the
    prior carries no label information the untouched ``|+>`` register is
    returned. With ``shots > 0`` the probabilities are
    replaced by measured frequencies.
    """
    options = options or LikelihoodOptions()
    if params.n_qubits != spec.n_qubits:
        raise DimensionError(
            f"Ansatz is on {params.n_qubits} qubits, feature map on {spec.n_qubits}"
        )
    components = build_label_component_states(spec, x_star)
    branches = branch_states(params)
    weight = _weight_from_branches(params.n_qubits, branches)
    matrix = np.stack([c.amplitudes for c in components])
    _, vector = label_probabilities(matrix, weight, branches, options)
    degenerate = vector.size == 0
    if degenerate:
        logger.warning("Label weights vanish for x*=%s; using the uniform label register", x_star)
        state = build_feature_state_test(spec, x_star)
    else:
        state = StateVector.from_amplitudes(vector, normalize=True)
    probabilities = measure_probabilities(state, spec.label_register)
    if shots > 0:
        counts = sample_measurements(state, spec.label_register, shots, seed)
        probabilities = np.array([counts.get(k, 0) / shots for k in range(len(probabilities))])
    return LabelDistribution(probabilities, state, degenerate)
