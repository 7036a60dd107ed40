"""Serialization: envelope round-trips and malformed-file rejection."""

import json

import numpy as np
import pytest

from cclvq.conditional import init_from_data, make_ensemble
from cclvq.errors import ValidationError
from cclvq.model_io import FORMAT_VERSION, load_model, save_model
from cclvq.models import classify_batch
from cclvq.synthetic import gen_two_dirac


@pytest.fixture
def trained_state():
    ds = gen_two_dirac(100, seed=1)
    state = make_ensemble("mlp", 3, 1, in_dim=1, hidden=6, seed=4)
    return init_from_data(state, ds, np.random.default_rng(2))


def test_round_trip_is_bitwise(trained_state, tmp_path):
    path = tmp_path / "model.json"
    save_model(path, trained_state, {"gamma_exp": 0.001})
    loaded, config = load_model(path)
    xs = np.linspace(-3, 3, 40).reshape(-1, 1)
    for a, b in zip(trained_state.experts, loaded.experts):
        assert np.array_equal(a.forward_batch(xs), b.forward_batch(xs))
    assert np.array_equal(
        classify_batch(trained_state.classifier, xs), classify_batch(loaded.classifier, xs)
    )
    assert config == {"gamma_exp": 0.001}


def test_round_trip_lookup_ensemble(tmp_path):
    state = make_ensemble("lookup", 2, 2, n_labels=3, seed=0)
    path = tmp_path / "lk.json"
    save_model(path, state)
    loaded, config = load_model(path)
    assert config is None
    assert loaded.experts[0].kind == "lookup"
    assert loaded.experts[0].n_labels == 3
    assert np.array_equal(loaded.experts[1].params, state.experts[1].params)


def test_envelope_shape_fields(trained_state, tmp_path):
    path = tmp_path / "model.json"
    save_model(path, trained_state)
    env = json.loads(path.read_text())
    assert env["version"] == FORMAT_VERSION
    assert env["expert_kind"] == "mlp"
    assert env["n"] == 3 and env["d"] == 1 and env["p"] == 1
    assert len(env["experts"]) == 3


def test_rejects_non_json(tmp_path):
    path = tmp_path / "junk.json"
    path.write_text("{not json")
    with pytest.raises(ValidationError):
        load_model(path)


def test_rejects_wrong_version(trained_state, tmp_path):
    path = tmp_path / "model.json"
    save_model(path, trained_state)
    env = json.loads(path.read_text())
    env["version"] = 99
    path.write_text(json.dumps(env))
    with pytest.raises(ValidationError, match="version"):
        load_model(path)


def test_rejects_missing_field(trained_state, tmp_path):
    path = tmp_path / "model.json"
    save_model(path, trained_state)
    env = json.loads(path.read_text())
    del env["classifier"]
    path.write_text(json.dumps(env))
    with pytest.raises(ValidationError, match="classifier"):
        load_model(path)


def test_rejects_count_mismatch(trained_state, tmp_path):
    path = tmp_path / "model.json"
    save_model(path, trained_state)
    env = json.loads(path.read_text())
    env["experts"] = env["experts"][:2]
    path.write_text(json.dumps(env))
    with pytest.raises(ValidationError, match="expert blocks"):
        load_model(path)


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(OSError):
        load_model(tmp_path / "absent.json")
