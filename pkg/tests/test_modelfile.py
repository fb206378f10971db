import json

import numpy as np
import pytest

from soldmd import bench, modelfile
from soldmd import decomposition as dmd
from soldmd.errors import FormatError


@pytest.fixture(scope="module")
def model():
    _, m = bench.fit_experiment1(bench.Experiment1Config())
    return m


def test_round_trip_byte_identical(model, tmp_path):
    p, q = tmp_path / "a.json", tmp_path / "b.json"
    modelfile.save_model(model, p)
    modelfile.save_model(modelfile.load_model(p), q)
    assert p.read_bytes() == q.read_bytes()


def test_round_trip_preserves_predictions(model):
    back = modelfile.loads(modelfile.dumps(model))
    t = np.linspace(0, 10, 41)
    a = dmd.reconstruct_trajectory(model, [0.3], [-0.2], t)
    b = dmd.reconstruct_trajectory(back, [0.3], [-0.2], t)
    np.testing.assert_array_equal(a, b)
    assert back.kernel == model.kernel and back.rule.grid == model.rule.grid


def test_layout(model):
    d = json.loads(modelfile.dumps(model))
    assert d["format_version"] == 1
    assert d["kernel"] == {"family": "gaussian", "shape": 24.0, "dim": 1}
    assert np.shape(d["eigenvalues"]) == (model.rank, 2)
    assert np.shape(d["coeffs"]) == (model.rank, 4, 2)
    assert np.shape(d["modes"]) == (1, model.rank, 2)
    assert np.shape(d["training_samples"]) == (4, 11, 1)


def test_rejects_other_versions(model):
    d = modelfile.to_dict(model)
    d["format_version"] = 2
    with pytest.raises(FormatError):
        modelfile.from_dict(d)


@pytest.mark.parametrize("key", ["kernel", "grid", "eigenvalues", "training_samples"])
def test_rejects_missing_fields(model, key):
    d = modelfile.to_dict(model)
    del d[key]
    with pytest.raises(FormatError):
        modelfile.from_dict(d)


def test_rejects_inconsistent_shapes(model):
    d = modelfile.to_dict(model)
    d["modes"] = d["modes"] * 2
    with pytest.raises(FormatError):
        modelfile.from_dict(d)


def test_rejects_bad_json(tmp_path):
    p = tmp_path / "m.json"
    p.write_text("{not json")
    with pytest.raises(FormatError):
        modelfile.load_model(p)
    with pytest.raises(FormatError):
        modelfile.load_model(tmp_path / "missing.json")
