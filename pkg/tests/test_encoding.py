import math

import numpy as np
import pytest

from qbayes.encoding import (
    FeatureMapSpec,
    LabeledSample,
    build_data_circuit,
    build_feature_state_test,
    build_feature_state_train,
    build_label_component_states,
    build_phase_circuit,
    label_index,
)
from qbayes.errors import EncodingError, InvalidParameterError
from qbayes.oracle import oracle_apply
from qbayes.seeding import make_rng
from qbayes.simulator import (
    StateVector,
    apply_circuit,
    inner_product,
    measure_probabilities,
    random_state,
)

SPEC = FeatureMapSpec(data_qubits=2, label_qubits=1)
X_STAR = (4.272566, 5.08938)


def test_zero_phases_leave_state_unchanged():
    spec = FeatureMapSpec(phi_single=lambda i, x: 0.0, phi_pair=lambda i, j, x: 0.0)
    state = random_state(spec.n_qubits, make_rng(0))
    out = apply_circuit(state, build_phase_circuit(spec, (1.0, 2.0)))
    assert np.allclose(out.amplitudes, state.amplitudes, atol=1e-15)


def test_phase_circuit_is_the_expected_diagonal():
    a, b, c = 0.3, -1.1, 0.45
    spec = FeatureMapSpec(phi_single=lambda i, x: (a, b)[i], phi_pair=lambda i, j, x: c)
    state = random_state(spec.n_qubits, make_rng(1))
    out = apply_circuit(state, build_phase_circuit(spec, (0.0, 0.0)))
    phases = []
    for index in range(8):
        z0 = 1 - 2 * ((index >> 2) & 1)
        z1 = 1 - 2 * ((index >> 1) & 1)
        phases.append(np.exp(1j * (a * z0 + b * z1 + c * z0 * z1)))
    assert np.allclose(out.amplitudes, state.amplitudes * np.array(phases), atol=1e-12)


def test_data_circuit_matches_dense_oracle():
    state = random_state(SPEC.n_qubits, make_rng(2))
    circuit = build_data_circuit(SPEC, (0.1, 0.2))
    fast = apply_circuit(state, circuit)
    dense = oracle_apply(state, circuit)
    assert np.max(np.abs(fast.amplitudes - dense.amplitudes)) <= 1e-10


def test_train_state_label_register():
    negative = build_feature_state_train(SPEC, LabeledSample.of((1.0, 2.0), -1))
    positive = build_feature_state_train(SPEC, LabeledSample.of((1.0, 2.0), 1))
    assert measure_probabilities(negative, SPEC.label_register)[0] == pytest.approx(1.0, abs=1e-12)
    assert measure_probabilities(positive, SPEC.label_register)[1] == pytest.approx(1.0, abs=1e-12)


def test_train_overlap_matches_independent_construction():
    a = build_feature_state_train(SPEC, LabeledSample.of((0.5, 1.5), 1))
    b = build_feature_state_train(SPEC, LabeledSample.of((2.5, 0.7), 1))
    a_again = build_feature_state_train(SPEC, LabeledSample.of((0.5, 1.5), 1))
    assert np.array_equal(a.amplitudes, a_again.amplitudes)
    direct = np.vdot(a.amplitudes, b.amplitudes)
    assert abs(inner_product(a, b) - direct) <= 1e-12


def test_test_state_label_is_uniform():
    state = build_feature_state_test(SPEC, (3.0, 1.0))
    assert np.allclose(measure_probabilities(state, SPEC.label_register), [0.5, 0.5], atol=1e-12)


def test_train_and_test_share_the_data_register():
    x = (2.2, 4.1)
    train = build_feature_state_train(SPEC, LabeledSample.of(x, -1)).amplitudes.reshape(-1, 2)
    test = build_feature_state_test(SPEC, x).amplitudes.reshape(-1, 2)
    assert np.allclose(test[:, 0] * math.sqrt(2), train[:, 0], atol=1e-12)
    assert np.allclose(test[:, 1] * math.sqrt(2), train[:, 0], atol=1e-12)


def test_named_test_point_is_normalized():
    assert build_feature_state_test(SPEC, X_STAR).norm() == pytest.approx(1.0, abs=1e-10)


def test_label_components_sum_to_test_state():
    spec = FeatureMapSpec(hidden_qubits=3)
    parts = build_label_component_states(spec, X_STAR)
    combined = sum(p.amplitudes for p in parts) / math.sqrt(len(parts))
    expected = build_feature_state_test(spec, X_STAR).amplitudes
    assert np.allclose(combined, expected, atol=1e-12)


def test_hidden_register_stays_in_zero():
    spec = FeatureMapSpec(hidden_qubits=3)
    assert spec.n_qubits == 6
    assert spec.hidden_register == (2, 3, 4)
    assert spec.label_register == (5,)
    state = build_feature_state_train(spec, LabeledSample.of((1.0, 5.0), 1))
    assert measure_probabilities(state, spec.hidden_register)[0] == pytest.approx(1.0, abs=1e-12)


def test_feature_map_is_injective_on_random_pairs():
    rng = make_rng(99)
    for _ in range(100):
        x, y = rng.uniform(0, 2 * math.pi, size=(2, 2))
        a = build_feature_state_train(SPEC, LabeledSample.of(x, 1))
        b = build_feature_state_train(SPEC, LabeledSample.of(y, 1))
        assert abs(inner_product(a, b)) < 1 - 1e-6


def test_feature_states_normalized():
    rng = make_rng(5)
    for x in rng.uniform(0, 2 * math.pi, size=(20, 2)):
        assert build_feature_state_train(SPEC, LabeledSample.of(x, 1)).norm() == pytest.approx(
            1.0, abs=1e-10
        )


def test_encoding_errors():
    with pytest.raises(EncodingError):
        build_phase_circuit(SPEC, (1.0, 2.0, 3.0))
    with pytest.raises(EncodingError):
        build_feature_state_train(SPEC, LabeledSample.of((1.0, 2.0)))
    with pytest.raises(EncodingError):
        LabeledSample.of((1.0, float("inf")), 1)
    with pytest.raises(EncodingError):
        label_index(0)
    with pytest.raises(InvalidParameterError):
        FeatureMapSpec(phi_family="nope")


def test_zero_state_under_empty_data_map():
    spec = FeatureMapSpec(data_qubits=1, repetitions=1, phi_family="linear")
    state = apply_circuit(StateVector.zero(spec.n_qubits), build_data_circuit(spec, (0.0,)))
    assert np.allclose(state.amplitudes, [1 / math.sqrt(2), 0, 1 / math.sqrt(2), 0], atol=1e-15)
