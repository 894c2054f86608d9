"""Dense statevector simulator.

Basis ordering: qubit 0 is the most significant bit of the basis index, so for
three qubits ``|q0 q1 q2>`` has index ``4*q0 + 2*q1 + q2``. Viewing the
amplitude array as a ``(2,) * n`` tensor in C order makes axis ``q`` the
qubit ``q``; every kernel below relies on that.

Rotation conventions (fixed global phase):

* ``RY(a) = exp(-i a Y / 2)``
* ``RZ(a) = exp(-i a Z / 2) = diag(e^{-ia/2}, e^{ia/2})``
* ``ZZ(a) = exp(-i a Z_i Z_j / 2)``

States are immutable: every operation returns a new :class:`StateVector`.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import StrEnum
from functools import lru_cache

import numpy as np
import numpy.typing as npt

from .errors import (
    DimensionError,
    InvalidArgumentError,
    InvalidGateError,
    InvalidParameterError,
)
from .seeding import make_rng

__all__ = [
    "GateKind",
    "Gate",
    "Circuit",
    "StateVector",
    "apply_gate",
    "apply_circuit",
    "measure_probabilities",
    "sample_measurements",
    "inner_product",
    "random_state",
    "random_circuit",
    "NORM_TOLERANCE",
]

logger = logging.getLogger(__name__)

ComplexArray = npt.NDArray[np.complex128]
FloatArray = npt.NDArray[np.float64]

NORM_TOLERANCE = 1e-10

_SQRT_HALF = 1.0 / math.sqrt(2.0)
_H = np.array([[_SQRT_HALF, _SQRT_HALF], [_SQRT_HALF, -_SQRT_HALF]], dtype=np.complex128)
_X = np.array([[0, 1], [1, 0]], dtype=np.complex128)


class GateKind(StrEnum):
    H = "h"
    X = "x"
    RY = "ry"
    RZ = "rz"
    CZ = "cz"
    CNOT = "cnot"
    ZZ = "zz"
    CONTROLLED = "controlled"


_ANGLED = {GateKind.RY, GateKind.RZ, GateKind.ZZ}
_SINGLE = {GateKind.H, GateKind.X, GateKind.RY, GateKind.RZ}
_SINGLY_CONTROLLED = {GateKind.CZ, GateKind.CNOT}


@dataclass(frozen=True)
class Gate:
    """One gate application.

    ``CZ``/``CNOT`` take one control and one target. ``ZZ`` takes two targets.
    ``CONTROLLED`` applies ``body`` (a circuit on the same register that never
    touches the controls) on the subspace where every control qubit is 1.
    """

    kind: GateKind
    targets: tuple[int, ...]
    controls: tuple[int, ...] = ()
    angle: float | None = None
    body: Circuit | None = None

    def __post_init__(self) -> None:
        kind = self.kind
        if kind in _SINGLE and (len(self.targets) != 1 or self.controls):
            raise InvalidGateError(f"{kind} acts on exactly one target and no controls")
        if kind in _SINGLY_CONTROLLED and (len(self.targets) != 1 or len(self.controls) != 1):
            raise InvalidGateError(f"{kind} needs exactly one control and one target")
        if kind is GateKind.ZZ and (len(self.targets) != 2 or self.controls):
            raise InvalidGateError("zz acts on exactly two targets")
        if kind is GateKind.CONTROLLED:
            if not self.controls or self.body is None:
                raise InvalidGateError("controlled gate needs controls and a body circuit")
            touched = set(self.body.qubits())
            if touched & set(self.controls):
                raise InvalidGateError("controlled body must not act on its control qubits")
        qubits = self.qubits()
        if len(set(qubits)) != len(qubits):
            raise InvalidGateError(f"{kind} qubit indices must be distinct: {qubits}")
        if any(q < 0 for q in qubits):
            raise InvalidGateError(f"{kind} has negative qubit index: {qubits}")
        if kind in _ANGLED:
            if self.angle is None or not math.isfinite(self.angle):
                raise InvalidParameterError(f"{kind} needs a finite angle, got {self.angle}")

    def qubits(self) -> tuple[int, ...]:
        return self.controls + self.targets

    def adjoint(self) -> Gate:
        if self.kind in _ANGLED:
            assert self.angle is not None
            return Gate(self.kind, self.targets, self.controls, -self.angle)
        if self.kind is GateKind.CONTROLLED:
            assert self.body is not None
            return Gate(self.kind, self.targets, self.controls, body=self.body.adjoint())
        return self

    # Convenience constructors
    @classmethod
    def h(cls, q: int) -> Gate:
        return cls(GateKind.H, (q,))

    @classmethod
    def x(cls, q: int) -> Gate:
        return cls(GateKind.X, (q,))

    @classmethod
    def ry(cls, q: int, angle: float) -> Gate:
        return cls(GateKind.RY, (q,), angle=float(angle))

    @classmethod
    def rz(cls, q: int, angle: float) -> Gate:
        return cls(GateKind.RZ, (q,), angle=float(angle))

    @classmethod
    def cz(cls, control: int, target: int) -> Gate:
        return cls(GateKind.CZ, (target,), (control,))

    @classmethod
    def cnot(cls, control: int, target: int) -> Gate:
        return cls(GateKind.CNOT, (target,), (control,))

    @classmethod
    def zz(cls, a: int, b: int, angle: float) -> Gate:
        return cls(GateKind.ZZ, (a, b), angle=float(angle))

    @classmethod
    def controlled(cls, controls: Sequence[int], body: Circuit) -> Gate:
        return cls(GateKind.CONTROLLED, tuple(sorted(body.qubits())), tuple(controls), body=body)


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self) -> None:
        if self.n_qubits < 1:
            raise InvalidArgumentError(f"Circuit needs at least one qubit, got {self.n_qubits}")
        for gate in self.gates:
            _check_gate_fits(gate, self.n_qubits)

    def __len__(self) -> int:
        return len(self.gates)

    def __add__(self, other: Circuit) -> Circuit:
        if other.n_qubits != self.n_qubits:
            raise DimensionError(
                f"Cannot compose circuits on {self.n_qubits} and {other.n_qubits} qubits"
            )
        return Circuit(self.n_qubits, self.gates + other.gates)

    def qubits(self) -> tuple[int, ...]:
        seen: set[int] = set()
        for gate in self.gates:
            seen.update(gate.qubits())
        return tuple(sorted(seen))

    def adjoint(self) -> Circuit:
        return Circuit(self.n_qubits, tuple(g.adjoint() for g in reversed(self.gates)))

    @classmethod
    def of(cls, n_qubits: int, gates: Iterable[Gate]) -> Circuit:
        return cls(n_qubits, tuple(gates))


def _check_gate_fits(gate: Gate, n_qubits: int) -> None:
    bad = [q for q in gate.qubits() if q >= n_qubits]
    if bad:
        raise InvalidGateError(
            f"{gate.kind} references qubit(s) {bad} on a {n_qubits}-qubit register"
        )
    if gate.body is not None and gate.body.n_qubits != n_qubits:
        raise InvalidGateError(
            f"controlled body is on {gate.body.n_qubits} qubits, register has {n_qubits}"
        )


@dataclass(frozen=True, eq=False)
class StateVector:
    n_qubits: int
    amplitudes: ComplexArray = field(repr=False)

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=np.complex128).reshape(-1)
        if amps.shape[0] != 1 << self.n_qubits:
            raise DimensionError(
                f"{self.n_qubits} qubits need {1 << self.n_qubits} amplitudes, got {amps.shape[0]}"
            )
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def zero(cls, n_qubits: int) -> StateVector:
        return cls.basis(n_qubits, 0)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> StateVector:
        amps = np.zeros(1 << n_qubits, dtype=np.complex128)
        amps[index] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def from_amplitudes(cls, amplitudes: npt.ArrayLike, normalize: bool = False) -> StateVector:
        amps = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        size = amps.shape[0]
        n = size.bit_length() - 1
        if size < 2 or 1 << n != size:
            raise DimensionError(f"Amplitude count must be a power of two >= 2, got {size}")
        if normalize:
            norm = float(np.linalg.norm(amps))
            if norm == 0.0:
                raise InvalidArgumentError("Cannot normalize the zero vector")
            amps = amps / norm
        return cls(n, amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def probabilities(self) -> FloatArray:
        return np.abs(self.amplitudes) ** 2

    def tensor(self, other: StateVector) -> StateVector:
        """``self (x) other``; ``self`` occupies the more significant qubits."""
        amps = np.kron(self.amplitudes, other.amplitudes)
        return StateVector(self.n_qubits + other.n_qubits, amps)


# ---------------------------------------------------------------------------
# Kernels on raw amplitude arrays


@lru_cache(maxsize=256)
def _bit(n_qubits: int, qubit: int) -> npt.NDArray[np.int64]:
    bits = (np.arange(1 << n_qubits) >> (n_qubits - 1 - qubit)) & 1
    bits.flags.writeable = False
    return bits


def _rotation_matrix(kind: GateKind, angle: float) -> ComplexArray:
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    if kind is GateKind.RY:
        return np.array([[c, -s], [s, c]], dtype=np.complex128)
    return np.array([[c - 1j * s, 0], [0, c + 1j * s]], dtype=np.complex128)


def _apply_single(amps: ComplexArray, n: int, q: int, u: ComplexArray) -> ComplexArray:
    view = amps.reshape(1 << q, 2, 1 << (n - q - 1))
    return np.einsum("ab,ibj->iaj", u, view).reshape(-1)


def _apply_cnot(amps: ComplexArray, n: int, control: int, target: int) -> ComplexArray:
    out = amps.copy()
    tensor = out.reshape((2,) * n)
    lo: list[int | slice] = [slice(None)] * n
    hi: list[int | slice] = [slice(None)] * n
    lo[control] = hi[control] = 1
    lo[target], hi[target] = 0, 1
    a, b = tensor[tuple(lo)].copy(), tensor[tuple(hi)].copy()
    tensor[tuple(lo)], tensor[tuple(hi)] = b, a
    return out


def _apply_raw(amps: ComplexArray, n: int, gate: Gate) -> ComplexArray:
    kind = gate.kind
    if kind is GateKind.H:
        return _apply_single(amps, n, gate.targets[0], _H)
    if kind is GateKind.X:
        return _apply_single(amps, n, gate.targets[0], _X)
    if kind in (GateKind.RY, GateKind.RZ):
        assert gate.angle is not None
        return _apply_single(amps, n, gate.targets[0], _rotation_matrix(kind, gate.angle))
    if kind is GateKind.CZ:
        both = _bit(n, gate.controls[0]) & _bit(n, gate.targets[0])
        return np.where(both == 1, -amps, amps)
    if kind is GateKind.CNOT:
        return _apply_cnot(amps, n, gate.controls[0], gate.targets[0])
    if kind is GateKind.ZZ:
        assert gate.angle is not None
        parity = _bit(n, gate.targets[0]) ^ _bit(n, gate.targets[1])
        half = gate.angle / 2
        return amps * np.where(parity == 1, np.exp(1j * half), np.exp(-1j * half))
    # CONTROLLED: evolve the whole register, keep the result only where all controls are 1.
    assert gate.body is not None
    evolved = _run(amps, n, gate.body.gates)
    mask = np.ones(1 << n, dtype=bool)
    for c in gate.controls:
        mask &= _bit(n, c) == 1
    return np.where(mask, evolved, amps)


def _run(amps: ComplexArray, n: int, gates: Iterable[Gate]) -> ComplexArray:
    for gate in gates:
        amps = _apply_raw(amps, n, gate)
    return amps


# ---------------------------------------------------------------------------
# Public operations


def apply_gate(state: StateVector, gate: Gate) -> StateVector:
    """Return ``U|state>`` for the gate's unitary ``U``."""
    _check_gate_fits(gate, state.n_qubits)
    return StateVector(state.n_qubits, _apply_raw(state.amplitudes, state.n_qubits, gate))


def apply_circuit(state: StateVector, circuit: Circuit) -> StateVector:
    if circuit.n_qubits != state.n_qubits:
        raise DimensionError(
            f"Circuit is on {circuit.n_qubits} qubits but state has {state.n_qubits}"
        )
    return StateVector(state.n_qubits, _run(state.amplitudes, state.n_qubits, circuit.gates))


def _check_subset(n_qubits: int, qubit_subset: Sequence[int]) -> tuple[int, ...]:
    subset = tuple(int(q) for q in qubit_subset)
    if not subset:
        raise InvalidArgumentError("Qubit subset must not be empty")
    if len(set(subset)) != len(subset):
        raise InvalidArgumentError(f"Qubit subset has duplicates: {subset}")
    if any(q < 0 or q >= n_qubits for q in subset):
        raise InvalidArgumentError(f"Qubit subset {subset} invalid for {n_qubits} qubits")
    return subset


def measure_probabilities(state: StateVector, qubit_subset: Sequence[int]) -> FloatArray:
    """Born-rule marginal over ``qubit_subset``.

    Entry ``k`` is the probability of outcome ``k``, read with the first listed
    qubit as the most significant bit.
    """
    subset = _check_subset(state.n_qubits, qubit_subset)
    n = state.n_qubits
    probs = state.probabilities().reshape((2,) * n)
    traced = tuple(q for q in range(n) if q not in subset)
    marginal = probs.sum(axis=traced) if traced else probs
    kept = sorted(subset)
    marginal = np.transpose(marginal, [kept.index(q) for q in subset])
    return np.ascontiguousarray(marginal).reshape(-1)


def sample_measurements(
    state: StateVector, qubit_subset: Sequence[int], shots: int, seed: int
) -> dict[int, int]:
    """Draw ``shots`` i.i.d. outcomes; returns counts for outcomes seen at least once."""
    if shots < 1:
        raise InvalidArgumentError(f"shots must be >= 1, got {shots}")
    probs = measure_probabilities(state, qubit_subset)
    probs = probs / probs.sum()
    counts = make_rng(seed).multinomial(shots, probs)
    return {int(k): int(c) for k, c in enumerate(counts) if c}


def inner_product(a: StateVector, b: StateVector) -> complex:
    """``<a|b>``, conjugating ``a``."""
    if a.n_qubits != b.n_qubits:
        raise DimensionError(f"Inner product of {a.n_qubits}- and {b.n_qubits}-qubit states")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def random_state(n_qubits: int, rng: np.random.Generator) -> StateVector:
    """Haar-random pure state."""
    amps = rng.standard_normal(1 << n_qubits) + 1j * rng.standard_normal(1 << n_qubits)
    return StateVector.from_amplitudes(amps, normalize=True)


def random_circuit(n_qubits: int, n_gates: int, rng: np.random.Generator) -> Circuit:
    """Random circuit over the full gate set, used for property tests."""
    kinds = list(GateKind)
    if n_qubits < 3:
        kinds.remove(GateKind.CONTROLLED)
    if n_qubits < 2:
        kinds = [k for k in kinds if k in _SINGLE]
    gates: list[Gate] = []
    for _ in range(n_gates):
        kind = kinds[int(rng.integers(len(kinds)))]
        qubits = [int(q) for q in rng.permutation(n_qubits)]
        angle = float(rng.uniform(-2 * math.pi, 2 * math.pi))
        if kind in _SINGLE:
            gates.append(Gate(kind, (qubits[0],), angle=angle if kind in _ANGLED else None))
        elif kind in _SINGLY_CONTROLLED:
            gates.append(Gate(kind, (qubits[1],), (qubits[0],)))
        elif kind is GateKind.ZZ:
            gates.append(Gate.zz(qubits[0], qubits[1], angle))
        else:
            control, a, b = qubits[0], qubits[1], qubits[2]
            body = Circuit.of(n_qubits, [Gate.ry(a, angle), Gate.cnot(a, b)])
            gates.append(Gate.controlled([control], body))
    return Circuit.of(n_qubits, gates)
