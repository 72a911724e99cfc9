import numpy as np
import pytest
from sklearn.base import clone

from opsin_evo.estimator import OpsinEvolver, OpsinLayer
from opsin_evo.exceptions import DimensionError, ParameterError
from opsin_evo.presets import scene_preset
from opsin_evo.scenes import synth_scenes
from opsin_evo.spectral import OpsinBank, render


@pytest.fixture(scope="module")
def data():
    cfg = scene_preset("two-target", seed=1)
    cubes = synth_scenes(cfg, 2)
    return np.stack([c.data for c in cubes]), np.stack([c.labels for c in cubes]), cubes


def test_layer_matches_render(data):
    X, _, cubes = data
    layer = OpsinLayer(lambdas=(560, 425)).fit(X)
    out = layer.transform(X)
    assert out.shape == X.shape[:3] + (2,)
    ref = render(cubes[0], OpsinBank.from_lambdas([560.0, 425.0])).channels
    np.testing.assert_allclose(out[0], ref, rtol=1e-14)
    np.testing.assert_allclose(layer.transform(X[0]), ref, rtol=1e-14)


def test_layer_params_and_clone():
    layer = OpsinLayer(lambdas=(500,), sigma=30.0)
    assert layer.get_params()["sigma"] == 30.0
    layer.set_params(sigma=20.0)
    c = clone(layer)
    assert c.get_params() == layer.get_params() and c is not layer


def test_layer_validation(data):
    X, _, _ = data
    layer = OpsinLayer().fit(X)
    with pytest.raises(DimensionError):
        layer.transform(X[..., :10])
    with pytest.raises(DimensionError):
        OpsinLayer().fit(X[0, 0])
    with pytest.raises(ParameterError):
        OpsinLayer().fit(-X)
    with pytest.raises(DimensionError):
        OpsinLayer(wavelengths=[400, 500]).fit(X)


def test_evolver_fit_predict_score(data):
    X, y, _ = data
    est = OpsinEvolver(lambdas=(560, 425), epochs=20, lr_opsin=0.2, lr_head=1e-2)
    assert est.fit(X, y) is est
    assert est.n_classes_ == 2 and len(est.trajectory_) == 21
    pred = est.predict(X)
    assert pred.shape == y.shape and pred.dtype.kind == "i"
    assert 0.0 <= est.score(X, y) <= 1.0
    assert est.predict(X[0]).shape == y[0].shape
    shifts = np.array([r.applied_shift for r in est.trajectory_])
    assert np.all(np.abs(shifts) <= 0.5)


def test_evolver_frozen_and_deterministic(data):
    X, y, _ = data
    a = OpsinEvolver(trainable=[True, False], epochs=5).fit(X, y)
    b = clone(a).fit(X, y)
    assert a.bank_.kernels[1].lambda_max == 425.0
    assert a.bank_.to_dicts() == b.bank_.to_dicts()


def test_evolver_params_roundtrip():
    est = OpsinEvolver(epochs=7, tau=0.1, depth_m=10.0)
    p = est.get_params()
    assert p["epochs"] == 7 and p["tau"] == 0.1
    assert clone(est).get_params() == p


def test_evolver_validation(data):
    X, y, _ = data
    with pytest.raises(DimensionError):
        OpsinEvolver(epochs=1).fit(X, y[:, :4])
    with pytest.raises(ParameterError):
        OpsinEvolver(epochs=1).fit(X, y - 1)
    with pytest.raises(ParameterError):
        OpsinEvolver(epochs=1).fit(X, y + 0.5)
    est = OpsinEvolver(epochs=1).fit(X, y)
    with pytest.raises(DimensionError):
        est.predict(X[..., :5])
