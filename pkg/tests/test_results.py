import json

import numpy as np
import pytest
from pydantic import ValidationError

from qbayes.ansatz import AnsatzParams
from qbayes.config import RunConfig
from qbayes.data import RescaleRecord
from qbayes.encoding import FeatureMapSpec
from qbayes.errors import UsageError
from qbayes.inference import LabelRule, LikelihoodOptions
from qbayes.results import (
    SCHEMA_VERSION,
    ResultRecord,
    Stopwatch,
    load_model,
    save_model,
    write_result,
)
from qbayes.seeding import make_rng
from qbayes.training import SPSAConfig, TrainedModel


def _model() -> TrainedModel:
    spec = FeatureMapSpec(hidden_qubits=1, phi_family="linear")
    params = AnsatzParams.random(spec.n_qubits, 2, 2, make_rng(1), [(0, 2), (1, 2)])
    return TrainedModel(
        params=params,
        spec=spec,
        trace=(0.1, 0.2, 0.25),
        config=SPSAConfig(iterations=3, eta=0.1, seed=4),
        options=LikelihoodOptions(2, LabelRule.LIKELIHOOD),
        rescale_record=RescaleRecord((0.5, 1.0), (2.0, 0.5)),
        evaluations=6,
    )


def test_model_file_keeps_everything(tmp_path):
    model = _model()
    path = save_model(model, tmp_path / "out" / "model.json", RunConfig().model_dump(mode="json"))
    loaded, document = load_model(path)
    assert document.schema_version == SCHEMA_VERSION
    assert np.array_equal(loaded.params.theta, model.params.theta)
    assert loaded.params.entangler_edges == model.params.entangler_edges
    assert loaded.spec.n_qubits == model.spec.n_qubits
    assert loaded.spec.phi_family == "linear"
    assert loaded.trace == model.trace
    assert loaded.config == model.config
    assert loaded.options == model.options
    assert loaded.rescale_record == model.rescale_record
    assert loaded.evaluations == 6
    assert document.config["spsa"]["iterations"] == 140


def test_missing_model_file(tmp_path):
    with pytest.raises(UsageError):
        load_model(tmp_path / "model.json")


def test_invalid_model_file(tmp_path):
    path = tmp_path / "model.json"
    path.write_text("{not json")
    with pytest.raises(UsageError):
        load_model(path)
    path.write_text(json.dumps({"feature_map": {}}))
    with pytest.raises(UsageError):
        load_model(path)


def test_model_schema_version_checked(tmp_path):
    path = save_model(_model(), tmp_path / "model.json", {})
    data = json.loads(path.read_text())
    data["schema_version"] = SCHEMA_VERSION + 1
    path.write_text(json.dumps(data))
    with pytest.raises(UsageError):
        load_model(path)


def test_result_record(tmp_path):
    record = ResultRecord(command="train", config={"shots": 0}, metrics={"accuracy": 0.75})
    path = write_result(record, tmp_path / "train-result.json")
    data = json.loads(path.read_text())
    assert data["schema_version"] == 1
    assert data["command"] == "train"
    assert data["metrics"] == {"accuracy": 0.75}
    assert set(data) == {
        "schema_version",
        "command",
        "config",
        "metrics",
        "wall_clock_seconds",
        "library_version",
    }
    with pytest.raises(ValidationError):
        ResultRecord(command="train", config={}, extra_field=1)


def test_stopwatch():
    assert Stopwatch().elapsed >= 0.0
