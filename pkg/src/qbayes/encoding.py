"""Feature-map encoding of classical samples into feature states.

Register layout for ``n = m + h + L`` qubits (qubit 0 most significant)::

    [ data 0..m-1 | hidden m..m+h-1 | label n-L..n-1 ]

The data register holds ``U_x |0>^m`` with ``U_x = U_phi H^m U_phi H^m`` (for
the default two repetitions) and

    U_phi(x) = exp(i * sum_i phi_i(x) Z_i + i * sum_{i<j} phi_ij(x) Z_i Z_j).

The hidden register stays in ``|0>``; it only exists so feature states live in
the same space as the prior weight state. Training states put the label into
the label register as a basis state; test states put it in uniform
superposition.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable
from dataclasses import dataclass
from itertools import combinations
from typing import Any

import numpy as np
import numpy.typing as npt

from .errors import EncodingError, InvalidParameterError
from .simulator import Circuit, ComplexArray, Gate, StateVector, apply_circuit

__all__ = [
    "LabeledSample",
    "FeatureMapSpec",
    "PHI_FAMILIES",
    "label_index",
    "label_from_index",
    "build_phase_circuit",
    "build_data_circuit",
    "build_feature_state_train",
    "build_feature_state_test",
    "build_label_component_states",
    "feature_matrix",
]

PhiSingle = Callable[[int, npt.NDArray[np.float64]], float]
PhiPair = Callable[[int, int, npt.NDArray[np.float64]], float]


def _phi_identity(i: int, x: npt.NDArray[np.float64]) -> float:
    return float(x[i])


def _phi_pi_product(i: int, j: int, x: npt.NDArray[np.float64]) -> float:
    return float((math.pi - x[i]) * (math.pi - x[j]))


def _phi_zero_pair(i: int, j: int, x: npt.NDArray[np.float64]) -> float:
    return 0.0


PHI_FAMILIES: dict[str, tuple[PhiSingle, PhiPair]] = {
    "pi_product": (_phi_identity, _phi_pi_product),
    "linear": (_phi_identity, _phi_zero_pair),
}


@dataclass(frozen=True)
class LabeledSample:
    x_data: tuple[float, ...]
    x_label: int | None = None

    def __post_init__(self) -> None:
        if not all(math.isfinite(v) for v in self.x_data):
            raise EncodingError(f"Sample has non-finite features: {self.x_data}")
        if self.x_label is not None and self.x_label not in (-1, 1):
            raise EncodingError(f"Label must be -1 or +1, got {self.x_label}")

    @classmethod
    def of(cls, x: Iterable[float], label: int | None = None) -> LabeledSample:
        return cls(tuple(float(v) for v in x), label)


@dataclass(frozen=True)
class FeatureMapSpec:
    data_qubits: int = 2
    label_qubits: int = 1
    hidden_qubits: int = 0
    repetitions: int = 2
    phi_family: str = "pi_product"
    phi_single: PhiSingle | None = None
    phi_pair: PhiPair | None = None

    def __post_init__(self) -> None:
        if self.data_qubits < 1 or self.label_qubits < 1:
            raise InvalidParameterError(
                f"Need >= 1 data and label qubit, got {self.data_qubits}/{self.label_qubits}"
            )
        if self.hidden_qubits < 0 or self.repetitions < 1:
            raise InvalidParameterError(
                f"Invalid hidden_qubits={self.hidden_qubits} or repetitions={self.repetitions}"
            )
        if self.phi_single is None or self.phi_pair is None:
            if self.phi_family not in PHI_FAMILIES:
                raise InvalidParameterError(f"Unknown phi family '{self.phi_family}'")
            single, pair = PHI_FAMILIES[self.phi_family]
            object.__setattr__(self, "phi_single", self.phi_single or single)
            object.__setattr__(self, "phi_pair", self.phi_pair or pair)

    @property
    def m(self) -> int:
        return self.data_qubits

    @property
    def n_qubits(self) -> int:
        return self.data_qubits + self.hidden_qubits + self.label_qubits

    @property
    def data_register(self) -> tuple[int, ...]:
        return tuple(range(self.data_qubits))

    @property
    def hidden_register(self) -> tuple[int, ...]:
        return tuple(range(self.data_qubits, self.data_qubits + self.hidden_qubits))

    @property
    def label_register(self) -> tuple[int, ...]:
        return tuple(range(self.n_qubits - self.label_qubits, self.n_qubits))

    @property
    def visible_register(self) -> tuple[int, ...]:
        return self.data_register + self.label_register

    def to_dict(self) -> dict[str, Any]:
        return {
            "data_qubits": self.data_qubits,
            "label_qubits": self.label_qubits,
            "hidden_qubits": self.hidden_qubits,
            "repetitions": self.repetitions,
            "phi_family": self.phi_family,
        }


def label_index(label: int) -> int:
    """Binary labels map to label-register basis index: -1 -> 0, +1 -> 1."""
    if label not in (-1, 1):
        raise EncodingError(f"Label must be -1 or +1, got {label}")
    return 1 if label == 1 else 0


def label_from_index(index: int) -> int:
    return 1 if index else -1


def _checked_data(spec: FeatureMapSpec, x_data: npt.ArrayLike) -> npt.NDArray[np.float64]:
    x = np.asarray(x_data, dtype=np.float64).reshape(-1)
    if x.shape[0] != spec.data_qubits:
        raise EncodingError(
            f"Feature vector has dimension {x.shape[0]}, feature map expects {spec.data_qubits}"
        )
    if not np.all(np.isfinite(x)):
        raise EncodingError(f"Feature vector has non-finite entries: {x.tolist()}")
    return x


def build_phase_circuit(spec: FeatureMapSpec, x_data: npt.ArrayLike) -> Circuit:
    """Diagonal ``U_phi(x)`` restricted to subsets of size one and two."""
    x = _checked_data(spec, x_data)
    assert spec.phi_single is not None and spec.phi_pair is not None
    gates: list[Gate] = []
    for i in spec.data_register:
        phi = spec.phi_single(i, x)
        if not math.isfinite(phi):
            raise EncodingError(f"phi_{i}(x) is not finite for x={x.tolist()}")
        # exp(i phi Z) == RZ(-2 phi)
        gates.append(Gate.rz(i, -2.0 * phi))
    for i, j in combinations(spec.data_register, 2):
        phi = spec.phi_pair(i, j, x)
        if not math.isfinite(phi):
            raise EncodingError(f"phi_{i}{j}(x) is not finite for x={x.tolist()}")
        gates.append(Gate.zz(i, j, -2.0 * phi))
    return Circuit.of(spec.n_qubits, gates)


def build_data_circuit(spec: FeatureMapSpec, x_data: npt.ArrayLike) -> Circuit:
    phase = build_phase_circuit(spec, x_data)
    hadamards = Circuit.of(spec.n_qubits, (Gate.h(q) for q in spec.data_register))
    circuit = Circuit(spec.n_qubits)
    for _ in range(spec.repetitions):
        circuit = circuit + hadamards + phase
    return circuit


def _label_circuit(spec: FeatureMapSpec, index: int) -> Circuit:
    if not 0 <= index < 1 << spec.label_qubits:
        raise EncodingError(f"Label index {index} does not fit {spec.label_qubits} label qubits")
    gates = [
        Gate.x(q)
        for k, q in enumerate(spec.label_register)
        if (index >> (spec.label_qubits - 1 - k)) & 1
    ]
    return Circuit.of(spec.n_qubits, gates)


def build_feature_state_train(spec: FeatureMapSpec, sample: LabeledSample) -> StateVector:
    if sample.x_label is None:
        raise EncodingError("Training feature state needs a labeled sample")
    circuit = build_data_circuit(spec, sample.x_data) + _label_circuit(
        spec, label_index(sample.x_label)
    )
    return apply_circuit(StateVector.zero(spec.n_qubits), circuit)


def build_feature_state_test(spec: FeatureMapSpec, x_data: npt.ArrayLike) -> StateVector:
    label_superposition = Circuit.of(spec.n_qubits, (Gate.h(q) for q in spec.label_register))
    circuit = build_data_circuit(spec, x_data) + label_superposition
    return apply_circuit(StateVector.zero(spec.n_qubits), circuit)


def build_label_component_states(spec: FeatureMapSpec, x_data: npt.ArrayLike) -> list[StateVector]:
    """``|Phi(x, t)>`` for every label-register basis index ``t``.

    The test state is their uniform superposition ``2^{-L/2} sum_t |Phi(x, t)>``.
    """
    data_state = apply_circuit(StateVector.zero(spec.n_qubits), build_data_circuit(spec, x_data))
    return [
        apply_circuit(data_state, _label_circuit(spec, t)) for t in range(1 << spec.label_qubits)
    ]


def feature_matrix(spec: FeatureMapSpec, samples: Iterable[LabeledSample]) -> ComplexArray:
    """Rows are training feature-state amplitudes, one per sample."""
    rows = [build_feature_state_train(spec, s).amplitudes for s in samples]
    if not rows:
        return np.zeros((0, 1 << spec.n_qubits), dtype=np.complex128)
    return np.vstack(rows)
