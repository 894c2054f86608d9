import math
from pathlib import Path

import pytest

from qbayes.config import (
    RunConfig,
    ensure_config_dir,
    get_config_dir,
    get_run_config_path,
    load_run_config,
)
from qbayes.errors import ConfigError
from qbayes.inference import LabelRule


def _config_dir(tmp_path: Path, monkeypatch) -> Path:
    directory = tmp_path / "cfg"
    monkeypatch.setenv("QBAYES_CONFIG_DIR", str(directory))
    return directory


def test_config_dir_override(tmp_path, monkeypatch):
    directory = _config_dir(tmp_path, monkeypatch)
    assert get_config_dir() == directory
    assert get_run_config_path() == directory / "run_config.toml"
    assert ensure_config_dir().is_dir()


def test_config_dir_follows_xdg(tmp_path, monkeypatch):
    monkeypatch.delenv("QBAYES_CONFIG_DIR", raising=False)
    monkeypatch.setenv("XDG_CONFIG_HOME", str(tmp_path))
    assert get_config_dir() == tmp_path / "qbayes"


def test_defaults_without_a_file(tmp_path, monkeypatch):
    _config_dir(tmp_path, monkeypatch)
    cfg = load_run_config()
    assert cfg == RunConfig()
    assert cfg.feature_map.hidden_qubits == 3
    assert cfg.spsa.iterations == 140
    assert cfg.qpde.n_samples == 40
    assert cfg.qpde.interval == pytest.approx(0.2 * math.pi)
    assert cfg.feature_map.label_rule is LabelRule.CONDITIONAL
    assert cfg.shots == 0 and cfg.rescale is True
    assert cfg.ansatz.n_hidden is None


def test_file_in_config_dir_is_used(tmp_path, monkeypatch):
    directory = _config_dir(tmp_path, monkeypatch)
    directory.mkdir(parents=True)
    (directory / "run_config.toml").write_text("shots = 100\n[spsa]\niterations = 7\n")
    cfg = load_run_config()
    assert cfg.shots == 100
    assert cfg.spsa.iterations == 7


def test_explicit_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_run_config(tmp_path / "missing.toml")


def test_unknown_key_rejected(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("[spsa]\nlearning_rate = 0.1\n")
    with pytest.raises(ConfigError):
        load_run_config(path)


def test_invalid_toml(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text("[spsa\n")
    with pytest.raises(ConfigError):
        load_run_config(path)


def test_angle_literals_in_config(tmp_path):
    path = tmp_path / "run.toml"
    path.write_text('[qpde]\ninterval = "0.2pi"\n[ansatz]\ninit_interval = "pi"\n')
    cfg = load_run_config(path)
    assert cfg.qpde.interval == pytest.approx(0.2 * math.pi)
    assert cfg.ansatz.init_interval == pytest.approx(math.pi)
    path.write_text('[qpde]\ninterval = "fast"\n')
    with pytest.raises(ConfigError):
        load_run_config(path)


def test_out_of_range_values():
    with pytest.raises(ConfigError):
        RunConfig.from_mapping({"spsa": {"eta_decay": 1.5}})
    with pytest.raises(ConfigError):
        RunConfig.from_mapping({"feature_map": {"phi_family": "nope"}})
    with pytest.raises(ConfigError):
        RunConfig.from_mapping({"feature_map": {"kernel_power": 3}})


def test_with_seed_reseeds_every_stream():
    cfg = RunConfig().with_seed(11)
    assert cfg.generator.seed == cfg.ansatz.seed == cfg.spsa.seed == cfg.qpde.seed == 11


def test_updated_ignores_none():
    cfg = RunConfig().updated(shots=None, threads=4)
    assert cfg.shots == 0 and cfg.threads == 4
    spsa = cfg.updated("spsa", iterations=3, eta=None)
    assert spsa.spsa.iterations == 3
    assert spsa.spsa.eta == 0.5
    with pytest.raises(ConfigError):
        cfg.updated(threads=0)


def test_initial_params_layout():
    cfg = RunConfig()
    params = cfg.initial_params()
    assert params.theta.shape == (1, 10, 6, 2)
    assert len(params.entangler_edges) == 9
    assert (params.theta >= 0).all() and (params.theta < 2 * math.pi).all()
    again = RunConfig().initial_params()
    assert (again.theta == params.theta).all()


def test_derived_records():
    cfg = RunConfig.from_mapping({"shots": 50, "generator": {"n_train_per_class": 10}})
    assert cfg.spsa_config().shots == 50
    assert cfg.qpde_config().shots == 50
    assert cfg.generator_spec().n_train_per_class == 10
    assert cfg.feature_map_spec().n_qubits == 6
    assert cfg.output_path("model.json") == Path("results") / "model.json"
    assert cfg.output_path("model.json", Path("elsewhere")) == Path("elsewhere/model.json")


def test_explicit_branch_count():
    params = RunConfig.from_mapping({"ansatz": {"n_hidden": 3, "layers": 2}}).initial_params()
    assert params.theta.shape == (3, 2, 6, 2)
