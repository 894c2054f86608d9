"""Dense-matrix reference simulator.

Builds the full ``2^n x 2^n`` unitary of each gate from Kronecker products and
multiplies. It shares no kernel code with :mod:`qbayes.simulator` and exists
only to cross-check it.
"""

from __future__ import annotations

import math
from functools import reduce

import numpy as np

from .errors import DimensionError, ResourceLimitError
from .simulator import Circuit, ComplexArray, Gate, GateKind, StateVector

__all__ = ["MAX_ORACLE_QUBITS", "gate_matrix", "circuit_matrix", "oracle_apply"]

MAX_ORACLE_QUBITS = 10

_I = np.eye(2, dtype=np.complex128)
_P0 = np.array([[1, 0], [0, 0]], dtype=np.complex128)
_P1 = np.array([[0, 0], [0, 1]], dtype=np.complex128)
_Z = np.array([[1, 0], [0, -1]], dtype=np.complex128)
_Y = np.array([[0, -1j], [1j, 0]], dtype=np.complex128)


def _single_qubit(gate: Gate) -> ComplexArray:
    if gate.kind is GateKind.H:
        return np.array([[1, 1], [1, -1]], dtype=np.complex128) / math.sqrt(2)
    if gate.kind is GateKind.X:
        return np.array([[0, 1], [1, 0]], dtype=np.complex128)
    assert gate.angle is not None
    half = gate.angle / 2
    pauli = _Y if gate.kind is GateKind.RY else _Z
    # exp(-i a P / 2) for an involutory Pauli P
    return math.cos(half) * _I - 1j * math.sin(half) * pauli


def _embed(n: int, ops: dict[int, ComplexArray]) -> ComplexArray:
    return reduce(np.kron, [ops.get(q, _I) for q in range(n)])


def gate_matrix(gate: Gate, n_qubits: int) -> ComplexArray:
    kind = gate.kind
    if kind in (GateKind.H, GateKind.X, GateKind.RY, GateKind.RZ):
        return _embed(n_qubits, {gate.targets[0]: _single_qubit(gate)})
    if kind in (GateKind.CZ, GateKind.CNOT):
        c, t = gate.controls[0], gate.targets[0]
        u = _Z if kind is GateKind.CZ else _single_qubit(Gate.x(t))
        return _embed(n_qubits, {c: _P0}) + _embed(n_qubits, {c: _P1, t: u})
    if kind is GateKind.ZZ:
        assert gate.angle is not None
        a, b = gate.targets
        zz = _embed(n_qubits, {a: _Z, b: _Z})
        half = gate.angle / 2
        return math.cos(half) * np.eye(1 << n_qubits) - 1j * math.sin(half) * zz
    assert gate.body is not None
    body = circuit_matrix(gate.body)
    projector = _embed(n_qubits, dict.fromkeys(gate.controls, _P1))
    return np.eye(1 << n_qubits) - projector + projector @ body


def circuit_matrix(circuit: Circuit) -> ComplexArray:
    if circuit.n_qubits > MAX_ORACLE_QUBITS:
        raise ResourceLimitError(
            f"Dense oracle limited to {MAX_ORACLE_QUBITS} qubits, circuit has {circuit.n_qubits}"
        )
    total = np.eye(1 << circuit.n_qubits, dtype=np.complex128)
    for gate in circuit.gates:
        total = gate_matrix(gate, circuit.n_qubits) @ total
    return total


def oracle_apply(state: StateVector, circuit: Circuit) -> StateVector:
    if state.n_qubits > MAX_ORACLE_QUBITS:
        raise ResourceLimitError(
            f"Dense oracle limited to {MAX_ORACLE_QUBITS} qubits, state has {state.n_qubits}"
        )
    if circuit.n_qubits != state.n_qubits:
        raise DimensionError(
            f"Circuit is on {circuit.n_qubits} qubits but state has {state.n_qubits}"
        )
    amps = state.amplitudes
    for gate in circuit.gates:
        amps = gate_matrix(gate, state.n_qubits) @ amps
    return StateVector(state.n_qubits, amps)
