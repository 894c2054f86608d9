"""Parallel hardware-efficient ansatz for the prior weight state.

One branch per hidden node::

    W(theta_p) = U_loc(theta_{p,l}) U_ent ... U_ent U_loc(theta_{p,1})
    U_loc(theta_t) = (x)_m exp(i theta^z_{m,t}/2 Z_m) exp(i theta^y_{m,t}/2 Y_m)

The angles are stored as they appear in the exponent, so one rotation is
``RY(-theta^y)`` followed by ``RZ(-theta^z)`` in simulator conventions.
``U_ent`` is one CZ per edge of the RBM graph.

The prior ``|w>`` is the normalized vector ``sum_p W(theta_p)|0>``. The sum of
unitaries is not unitary, so it is normalized after the fact;
:func:`lcu_weight_state` simulates the ancilla-based LCU circuit as a
cross-check.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import numpy.typing as npt

from .encoding import FeatureMapSpec
from .errors import DegenerateAnsatzError, InvalidParameterError
from .simulator import Circuit, ComplexArray, Gate, StateVector, apply_circuit

__all__ = [
    "Y_AXIS",
    "Z_AXIS",
    "AnsatzParams",
    "rbm_edges",
    "build_entangler",
    "build_branch_circuit",
    "branch_states",
    "build_weight_state",
    "lcu_weight_state",
    "perturbed_params",
    "continuity_slope",
]

logger = logging.getLogger(__name__)

Y_AXIS = 0
Z_AXIS = 1

Edge = tuple[int, int]
FloatArray = npt.NDArray[np.float64]

_DEGENERATE_NORM = 1e-12


def _check_edges(edges: Iterable[Sequence[int]], n_qubits: int) -> tuple[Edge, ...]:
    checked: list[Edge] = []
    for edge in edges:
        if len(edge) != 2:
            raise InvalidParameterError(f"Entangler edge must be a pair, got {edge}")
        i, j = int(edge[0]), int(edge[1])
        if i == j:
            raise InvalidParameterError(f"Entangler edge ({i}, {j}) is a self-loop")
        if not (0 <= i < n_qubits and 0 <= j < n_qubits):
            raise InvalidParameterError(f"Entangler edge ({i}, {j}) outside {n_qubits} qubits")
        checked.append((i, j))
    return tuple(checked)


@dataclass(frozen=True, eq=False)
class AnsatzParams:
    """Rotation angles ``theta[p, t, m, axis]`` (axis 0 = y, 1 = z) plus entangler edges."""

    n_qubits: int
    theta: FloatArray = field(repr=False)
    entangler_edges: tuple[Edge, ...] = ()

    def __post_init__(self) -> None:
        theta = np.array(self.theta, dtype=np.float64)
        if theta.ndim != 4 or theta.shape[2] != self.n_qubits or theta.shape[3] != 2:
            raise InvalidParameterError(
                f"theta must have shape (n_hidden, layers, {self.n_qubits}, 2), got {theta.shape}"
            )
        if theta.shape[0] < 1 or theta.shape[1] < 1:
            raise InvalidParameterError(f"Need n_hidden >= 1 and layers >= 1, got {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise InvalidParameterError("theta has non-finite angles")
        theta.flags.writeable = False
        object.__setattr__(self, "theta", theta)
        object.__setattr__(
            self, "entangler_edges", _check_edges(self.entangler_edges, self.n_qubits)
        )

    @property
    def n_hidden(self) -> int:
        return int(self.theta.shape[0])

    @property
    def layers(self) -> int:
        return int(self.theta.shape[1])

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(int(s) for s in self.theta.shape)

    def with_theta(self, theta: npt.ArrayLike) -> AnsatzParams:
        return AnsatzParams(self.n_qubits, np.asarray(theta), self.entangler_edges)

    @classmethod
    def zeros(
        cls, n_qubits: int, n_hidden: int, layers: int, edges: Iterable[Sequence[int]] = ()
    ) -> AnsatzParams:
        theta = np.zeros((n_hidden, layers, n_qubits, 2))
        return cls(n_qubits, theta, _check_edges(edges, n_qubits))

    @classmethod
    def random(
        cls,
        n_qubits: int,
        n_hidden: int,
        layers: int,
        rng: np.random.Generator,
        edges: Iterable[Sequence[int]] = (),
        interval: float = 2 * math.pi,
    ) -> AnsatzParams:
        """Angles i.i.d. uniform on ``[0, interval)``."""
        theta = rng.uniform(0.0, interval, size=(n_hidden, layers, n_qubits, 2))
        return cls(n_qubits, theta, _check_edges(edges, n_qubits))

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_qubits": self.n_qubits,
            "shape": list(self.shape),
            "theta": [float(v) for v in self.theta.reshape(-1)],
            "entangler_edges": [list(e) for e in self.entangler_edges],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> AnsatzParams:
        try:
            shape = tuple(int(s) for s in data["shape"])
            theta = np.asarray(data["theta"], dtype=np.float64).reshape(shape)
            edges = tuple((int(i), int(j)) for i, j in data.get("entangler_edges", []))
            return cls(int(data["n_qubits"]), theta, edges)
        except (KeyError, ValueError, TypeError) as e:
            raise InvalidParameterError(f"Malformed ansatz parameters: {e}") from e


def rbm_edges(spec: FeatureMapSpec) -> tuple[Edge, ...]:
    """Complete bipartite graph between hidden-node and visible-node qubits."""
    return tuple((h, v) for h in spec.hidden_register for v in spec.visible_register)


def build_entangler(edges: Iterable[Sequence[int]], n: int) -> Circuit:
    return Circuit.of(n, (Gate.cz(i, j) for i, j in _check_edges(edges, n)))


def build_branch_circuit(params: AnsatzParams, p: int) -> Circuit:
    if not 0 <= p < params.n_hidden:
        raise InvalidParameterError(f"Branch index {p} outside 0..{params.n_hidden - 1}")
    n = params.n_qubits
    entangler = build_entangler(params.entangler_edges, n).gates
    gates: list[Gate] = []
    for t in range(params.layers):
        if t > 0:
            gates.extend(entangler)
        for m in range(n):
            gates.append(Gate.ry(m, -params.theta[p, t, m, Y_AXIS]))
            gates.append(Gate.rz(m, -params.theta[p, t, m, Z_AXIS]))
    return Circuit.of(n, gates)


def branch_states(params: AnsatzParams) -> list[StateVector]:
    zero = StateVector.zero(params.n_qubits)
    return [apply_circuit(zero, build_branch_circuit(params, p)) for p in range(params.n_hidden)]


def _branch_sum(params: AnsatzParams) -> ComplexArray:
    return np.sum([s.amplitudes for s in branch_states(params)], axis=0)


def build_weight_state(params: AnsatzParams) -> StateVector:
    total = _branch_sum(params)
    norm = float(np.linalg.norm(total))
    if norm < _DEGENERATE_NORM:
        raise DegenerateAnsatzError("Ansatz branches cancel; weight state has zero norm")
    return StateVector(params.n_qubits, total / norm)


def _relocated(gate: Gate, offset: int, n_total: int) -> Gate:
    body = None if gate.body is None else _shifted(gate.body, offset, n_total)
    return Gate(
        gate.kind,
        tuple(q + offset for q in gate.targets),
        tuple(q + offset for q in gate.controls),
        gate.angle,
        body,
    )


def _shifted(circuit: Circuit, offset: int, n_total: int) -> Circuit:
    return Circuit.of(n_total, (_relocated(g, offset, n_total) for g in circuit.gates))


def _select_circuit(params: AnsatzParams, n_ancilla: int) -> Circuit:
    """``sum_p |p><p| (x) W(theta_p)`` with the ancilla register on top."""
    total = n_ancilla + params.n_qubits
    ancillas = list(range(n_ancilla))
    circuit = Circuit(total)
    for p in range(params.n_hidden):
        flips = Circuit.of(
            total,
            (Gate.x(a) for k, a in enumerate(ancillas) if not (p >> (n_ancilla - 1 - k)) & 1),
        )
        body = _shifted(build_branch_circuit(params, p), n_ancilla, total)
        circuit = circuit + flips + Circuit.of(total, [Gate.controlled(ancillas, body)]) + flips
    return circuit


def lcu_weight_state(params: AnsatzParams) -> tuple[StateVector, float]:
    """Post-selected output of the LCU circuit and its success probability.

    A power-of-two branch count uses ``H^a . SELECT . H^a``. Otherwise the
    ancilla register is prepared in the uniform superposition over the first
    ``n_hidden`` indices and projected back onto it, which leaves the padded
    indices out of the sum.
    """
    n_hidden, n = params.n_hidden, params.n_qubits
    n_ancilla = (n_hidden - 1).bit_length()
    if n_ancilla == 0:
        return branch_states(params)[0], 1.0
    total = n_ancilla + n
    select = _select_circuit(params, n_ancilla)
    if n_hidden == 1 << n_ancilla:
        hadamards = Circuit.of(total, (Gate.h(a) for a in range(n_ancilla)))
        joint = apply_circuit(StateVector.zero(total), hadamards + select + hadamards)
        post = joint.amplitudes[: 1 << n]
    else:
        prepare = np.zeros(1 << n_ancilla, dtype=np.complex128)
        prepare[:n_hidden] = 1.0 / math.sqrt(n_hidden)
        start = StateVector(n_ancilla, prepare).tensor(StateVector.zero(n))
        blocks = apply_circuit(start, select).amplitudes.reshape(1 << n_ancilla, 1 << n)
        post = prepare.conj() @ blocks
    success = float(np.vdot(post, post).real)
    if success < _DEGENERATE_NORM**2:
        raise DegenerateAnsatzError("LCU post-selection has zero success probability")
    return StateVector(n, post / math.sqrt(success)), success


def perturbed_params(params: AnsatzParams, delta: float, direction: npt.ArrayLike) -> AnsatzParams:
    """``theta + delta * direction`` for a +-1 direction tensor."""
    d = np.asarray(direction, dtype=np.float64)
    if d.shape != params.theta.shape:
        raise InvalidParameterError(
            f"Direction shape {d.shape} does not match theta shape {params.theta.shape}"
        )
    if not np.all(np.abs(d) == 1.0):
        raise InvalidParameterError("Direction entries must be -1 or +1")
    return params.with_theta(params.theta + delta * d)


def continuity_slope(
    params: AnsatzParams, deltas: Sequence[float] = (1e-2, 1e-3, 1e-4)
) -> float:
    """Log-log slope of ``|| |w(theta + d*1)> - |w(theta)> ||`` against ``d``."""
    base = build_weight_state(params).amplitudes
    ones = np.ones(params.theta.shape)
    distances = []
    for d in deltas:
        moved = build_weight_state(perturbed_params(params, d, ones)).amplitudes
        distances.append(float(np.linalg.norm(moved - base)))
    slope, _ = np.polyfit(np.log(deltas), np.log(distances), 1)
    return float(slope)
