import numpy as np
import pytest
from scipy.linalg import expm

from qbayes.errors import ResourceLimitError
from qbayes.oracle import circuit_matrix, gate_matrix, oracle_apply
from qbayes.seeding import make_rng
from qbayes.simulator import Circuit, Gate, StateVector, apply_gate, random_state

Y = np.array([[0, -1j], [1j, 0]])
Z = np.diag([1.0, -1.0]).astype(complex)


def test_rotations_match_matrix_exponential():
    a = 1.234
    assert np.allclose(gate_matrix(Gate.ry(0, a), 1), expm(-0.5j * a * Y), atol=1e-12)
    assert np.allclose(gate_matrix(Gate.rz(0, a), 1), expm(-0.5j * a * Z), atol=1e-12)
    expected = expm(-0.5j * a * np.kron(Z, Z))
    assert np.allclose(gate_matrix(Gate.zz(0, 1, a), 2), expected, atol=1e-12)


def test_single_hadamard_matches_simulator():
    state = StateVector.zero(1)
    dense = oracle_apply(state, Circuit.of(1, [Gate.h(0)]))
    assert np.allclose(dense.amplitudes, apply_gate(state, Gate.h(0)).amplitudes, atol=1e-15)


def test_identity_circuit():
    assert np.array_equal(circuit_matrix(Circuit(3)), np.eye(8))
    state = random_state(3, make_rng(0))
    assert np.allclose(oracle_apply(state, Circuit(3)).amplitudes, state.amplitudes)


def test_circuit_matrix_is_unitary():
    from qbayes.simulator import random_circuit

    u = circuit_matrix(random_circuit(4, 20, make_rng(1)))
    assert np.allclose(u.conj().T @ u, np.eye(16), atol=1e-10)


def test_oracle_size_limit():
    with pytest.raises(ResourceLimitError):
        oracle_apply(StateVector.zero(11), Circuit(11))
    with pytest.raises(ResourceLimitError):
        circuit_matrix(Circuit(11))
