"""Forecaster tests: forward contracts, plain training recovery on a
well-specified task, gradient integrity, and the plug-in property."""

import numpy as np
import pytest

from loadcast import nn
from loadcast.data import SeriesFrame, sliding_windows, split_60_20_20, zscore_apply, zscore_fit
from loadcast.errors import ConfigError, ShapeError
from loadcast.forecaster import (
    ForecasterConfig,
    LinearForecaster,
    MlpForecaster,
    forecast,
    load_forecaster,
    make_forecaster,
    predict_samples,
    save_forecaster,
    train_plain,
    train_with_guidance,
)
from loadcast.msp import MspConfig, MspModel
from tests.test_msp import wave_splits


def test_linear_zero_weights_zero_forecast():
    model = LinearForecaster(ForecasterConfig("linear", 6, 2, 3))
    model.weights[:] = 0.0
    model.bias[:] = 0.0
    out = forecast(model, np.random.default_rng(0).normal(size=(6, 3)))
    np.testing.assert_array_equal(out, np.zeros((2, 3)))


def test_linear_window_mean_weights():
    model = LinearForecaster(ForecasterConfig("linear", 4, 1, 2))
    model.weights[:] = 1.0 / 4.0
    model.bias[:] = 0.0
    x = np.array([[1.0, 10.0], [2.0, 20.0], [3.0, 30.0], [4.0, 40.0]])
    out = forecast(model, x)
    np.testing.assert_allclose(out, [[2.5, 25.0]])


@pytest.mark.parametrize("kind,per_variable", [("linear", True), ("linear", False), ("mlp", True)])
def test_forecast_shape_contract(kind, per_variable):
    config = ForecasterConfig(kind, 5, 3, 2, hidden=8, per_variable=per_variable)
    model = make_forecaster(config)
    out = forecast(model, np.random.default_rng(1).normal(size=(5, 2)))
    assert out.shape == (3, 2)


def test_forecast_shape_mismatch():
    model = make_forecaster(ForecasterConfig("linear", 5, 3, 2))
    with pytest.raises(ShapeError):
        forecast(model, np.zeros((4, 2)))


def sine_splits(l=480, lookback=12, horizon=3):
    """Noiseless periodic series: a per-variable linear map of the window
    predicts it exactly (copy from one period back)."""
    t = np.arange(l)
    values = np.column_stack(
        [np.sin(2 * np.pi * t / 12), np.cos(2 * np.pi * t / 12) + 0.5]
    )
    frame = SeriesFrame(3600 * t, values, ["a", "b"])
    labels = np.zeros_like(values, dtype=np.int64)
    train, val, test = split_60_20_20(frame)
    stats = zscore_fit(train)
    i1, i2 = train.length, train.length + val.length
    return [
        sliding_windows(zscore_apply(part, stats), lab, lookback, horizon)
        for part, lab in ((train, labels[:i1]), (val, labels[i1:i2]), (test, labels[i2:]))
    ]


def test_train_plain_recovers_noiseless_linear_task():
    train_w, val_w, test_w = sine_splits()
    model = make_forecaster(ForecasterConfig("linear", 12, 3, 2, seed=3))
    train_plain(model, train_w, val_w, lr=0.01, batch_size=32, max_epochs=200, patience=20)
    yhat = predict_samples(model, test_w)
    y = np.stack([s.y for s in test_w])
    assert np.abs(yhat - y).mean() < 0.05


def test_train_plain_best_snapshot_contract():
    train_w, val_w, _ = sine_splits(l=200)
    model = make_forecaster(ForecasterConfig("linear", 12, 3, 2, seed=4))
    history = train_plain(model, train_w, val_w, lr=0.01, batch_size=32, max_epochs=20)
    assert history.best_val_loss == min(history.val_loss)
    yhat = predict_samples(model, val_w)
    y = np.stack([s.y for s in val_w])
    assert np.abs(yhat - y).mean() == pytest.approx(history.best_val_loss, rel=1e-12)


@pytest.mark.parametrize("kind,per_variable", [("linear", True), ("linear", False), ("mlp", True)])
def test_forecaster_gradients_match_finite_differences(kind, per_variable):
    rng = np.random.default_rng(5)
    config = ForecasterConfig(kind, 5, 2, 2, hidden=6, per_variable=per_variable, seed=5)
    model = make_forecaster(config)
    x = rng.normal(size=(3, 5, 2))
    y = rng.normal(size=(3, 2, 2))

    def loss_fn():
        yhat = model.forward_batch(x)
        return float(np.abs(yhat - y).mean())

    yhat, cache = model.forward_batch(x, want_cache=True)
    err = yhat - y
    dy = np.sign(err) / err.size
    grads = model.backward_batch(cache, dy)
    report = nn.grad_check(loss_fn, model.params(), grads, names=model.param_names())
    assert report.max_rel_error < 1e-5


def test_plug_in_property_same_shapes_and_forward():
    train_w, val_w, _ = wave_splits(l=200)
    fc_config = ForecasterConfig("linear", 8, 4, 1, seed=6)
    plain = make_forecaster(fc_config)
    guided = make_forecaster(fc_config)
    teacher = MspModel(
        MspConfig(
            lookback=8, horizon=4, n_variables=1, class_counts=[2],
            trunk_channels=4, ue_channels=3, seed=2,
        )
    )
    train_plain(plain, train_w, val_w, max_epochs=3)
    train_with_guidance(guided, teacher, train_w, val_w, max_epochs=3)
    assert [p.shape for p in plain.params()] == [p.shape for p in guided.params()]
    assert type(plain) is type(guided)


def test_alpha_zero_guidance_equals_plain_via_wrapper():
    train_w, val_w, _ = wave_splits(l=200)
    fc_config = ForecasterConfig("linear", 8, 4, 1, seed=9)
    teacher = MspModel(
        MspConfig(
            lookback=8, horizon=4, n_variables=1, class_counts=[2],
            trunk_channels=4, ue_channels=3, seed=3,
        )
    )
    from loadcast.guidance import GuidanceConfig

    plain = make_forecaster(fc_config)
    train_plain(plain, train_w, val_w, max_epochs=8)
    guided = make_forecaster(fc_config)
    train_with_guidance(
        guided, teacher, train_w, val_w, GuidanceConfig(alpha=0.0), max_epochs=8
    )
    for a, b in zip(plain.params(), guided.params()):
        np.testing.assert_array_equal(a, b)


def test_guidance_geometry_mismatch_rejected():
    teacher = MspModel(
        MspConfig(
            lookback=8, horizon=4, n_variables=2, class_counts=[2, 2],
            trunk_channels=4, ue_channels=3, seed=0,
        )
    )
    student = make_forecaster(ForecasterConfig("linear", 8, 6, 2, seed=0))
    with pytest.raises(ConfigError, match="geometry"):
        train_with_guidance(student, teacher, [object()], [object()])


def test_linear_least_squares_affine_equivariance():
    # closed-form per-variable LSQ fit commutes with per-variable affine
    # rescaling of the data (predictions map back within 1e-6)
    rng = np.random.default_rng(7)
    l, lookback, horizon = 300, 6, 2
    series = np.cumsum(rng.normal(size=(l, 2)), axis=0)
    scale = np.array([2.5, 0.4])
    shift = np.array([-1.0, 3.0])
    rescaled = series * scale + shift

    def lsq_predict(data):
        n = l - lookback - horizon + 1
        preds = np.empty((n, horizon, 2))
        for i in range(2):
            xcol = np.stack([data[k : k + lookback, i] for k in range(n)])
            design = np.column_stack([xcol, np.ones(n)])
            ycol = np.stack(
                [data[k + lookback : k + lookback + horizon, i] for k in range(n)]
            )
            coef, *_ = np.linalg.lstsq(design, ycol, rcond=None)
            preds[:, :, i] = design @ coef
        return preds

    direct = lsq_predict(series)
    via_rescale = (lsq_predict(rescaled) - shift) / scale
    np.testing.assert_allclose(via_rescale, direct, atol=1e-6)


def test_mae_training_affine_equivariance_directional():
    # MAE training has no closed form; check the rescale-then-invert route
    # lands close to direct training, relative to the target scale
    train_w, val_w, test_w = sine_splits(l=260)
    direct = make_forecaster(ForecasterConfig("linear", 12, 3, 2, seed=11))
    train_plain(direct, train_w, val_w, lr=0.01, batch_size=32, max_epochs=60)

    scale = np.array([3.0, 0.5])
    shift = np.array([1.0, -2.0])

    def rescale(samples):
        out = []
        for s in samples:
            out.append(
                type(s)(x=s.x * scale + shift, y=s.y * scale + shift, s=s.s, origin=s.origin)
            )
        return out

    rescaled_model = make_forecaster(ForecasterConfig("linear", 12, 3, 2, seed=11))
    train_plain(
        rescaled_model, rescale(train_w), rescale(val_w), lr=0.01, batch_size=32, max_epochs=60
    )
    direct_pred = predict_samples(direct, test_w)
    via = (predict_samples(rescaled_model, rescale(test_w)) - shift) / scale
    y = np.stack([s.y for s in test_w])
    assert np.abs(via - direct_pred).mean() < 0.25 * np.abs(y).mean() + 0.05


def test_forecaster_checkpoint_round_trip(tmp_path):
    for kind, per_variable in (("linear", True), ("linear", False), ("mlp", True)):
        config = ForecasterConfig(kind, 5, 2, 2, hidden=6, per_variable=per_variable, seed=12)
        model = make_forecaster(config)
        path = tmp_path / f"{kind}_{per_variable}.json"
        save_forecaster(model, path)
        back = load_forecaster(path)
        x = np.random.default_rng(8).normal(size=(5, 2))
        np.testing.assert_array_equal(forecast(back, x), forecast(model, x))
        assert isinstance(back, (LinearForecaster, MlpForecaster))
