"""Ingestion, resampling, splitting, normalization, windowing tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loadcast import data
from loadcast.errors import DataError, ShapeError


def write_csv(tmp_path, text, name="series.csv"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def minute_frame(values):
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    ts = 60 * np.arange(len(values))
    names = [f"v{i}" for i in range(values.shape[1])]
    return data.SeriesFrame(ts, values, names)


def test_load_csv_well_formed(tmp_path):
    path = write_csv(tmp_path, "timestamp,a,b\n0,1.0,2.0\n60,3.5,4.5\n120,5.0,6.0\n")
    frame = data.load_csv(path)
    assert frame.length == 3 and frame.n_variables == 2
    assert frame.variable_names == ["a", "b"]
    np.testing.assert_array_equal(frame.values[1], [3.5, 4.5])


def test_load_csv_empty_body(tmp_path):
    path = write_csv(tmp_path, "timestamp,a\n")
    with pytest.raises(DataError, match="no data rows"):
        data.load_csv(path)


def test_load_csv_sorts_rows(tmp_path):
    sorted_frame = data.load_csv(write_csv(tmp_path, "timestamp,a\n0,1.0\n60,2.0\n120,3.0\n"))
    shuffled = data.load_csv(
        write_csv(tmp_path, "timestamp,a\n120,3.0\n0,1.0\n60,2.0\n", name="shuffled.csv")
    )
    np.testing.assert_array_equal(sorted_frame.timestamps, shuffled.timestamps)
    np.testing.assert_array_equal(sorted_frame.values, shuffled.values)


def test_load_csv_reports_bad_cell_position(tmp_path):
    path = write_csv(tmp_path, "timestamp,a,b\n0,1.0,2.0\n60,oops,4.0\n")
    with pytest.raises(DataError, match=r":3: column 'a'"):
        data.load_csv(path)


def test_load_csv_rejects_duplicate_timestamp(tmp_path):
    path = write_csv(tmp_path, "timestamp,a\n0,1.0\n0,2.0\n")
    with pytest.raises(DataError, match="duplicate timestamp 0"):
        data.load_csv(path)


def test_load_csv_rejects_empty_cell(tmp_path):
    path = write_csv(tmp_path, "timestamp,a,b\n0,1.0,\n")
    with pytest.raises(DataError, match="empty cell"):
        data.load_csv(path)


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(1)
    frame = minute_frame(rng.normal(size=(7, 3)))
    path = tmp_path / "rt.csv"
    data.save_csv(frame, path)
    back = data.load_csv(path)
    np.testing.assert_array_equal(back.values, frame.values)
    np.testing.assert_array_equal(back.timestamps, frame.timestamps)


def test_downsample_constant_hour():
    frame = minute_frame(np.ones(60))
    out = data.align_and_downsample(frame, 3600)
    assert out.length == 1
    np.testing.assert_array_equal(out.values, [[1.0]])


def test_downsample_mean_of_ramp():
    frame = minute_frame(np.arange(60.0))
    out = data.align_and_downsample(frame, 3600)
    np.testing.assert_allclose(out.values, [[29.5]])


def test_downsample_drops_partial_trailing_bucket():
    frame = minute_frame(np.arange(61.0))
    out = data.align_and_downsample(frame, 3600)
    assert out.length == 1
    np.testing.assert_allclose(out.values, [[29.5]])


def test_downsample_is_mean_preserving_per_bucket():
    rng = np.random.default_rng(7)
    values = rng.normal(size=(240, 2))
    frame = minute_frame(values)
    out = data.align_and_downsample(frame, 3600)
    assert out.length == 4
    for b in range(4):
        np.testing.assert_allclose(
            out.values[b], values[60 * b : 60 * (b + 1)].mean(axis=0), atol=1e-12
        )


def test_downsample_rejects_finer_period():
    frame = minute_frame(np.ones(10))
    with pytest.raises(DataError, match="finer than the native interval"):
        data.align_and_downsample(frame, 30)


def test_downsample_rejects_empty_frame():
    frame = data.SeriesFrame(np.array([], dtype=np.int64), np.zeros((0, 1)), ["x"])
    with pytest.raises(DataError, match="empty"):
        data.align_and_downsample(frame, 3600)


def test_split_floor_arithmetic():
    train, val, test = data.split_60_20_20(minute_frame(np.arange(10.0)))
    assert (train.length, val.length, test.length) == (6, 2, 2)
    train, val, test = data.split_60_20_20(minute_frame(np.arange(5.0)))
    assert (train.length, val.length, test.length) == (3, 1, 1)


def test_split_is_a_partition():
    frame = minute_frame(np.arange(13.0))
    train, val, test = data.split_60_20_20(frame)
    glued = np.concatenate([train.values, val.values, test.values])
    np.testing.assert_array_equal(glued, frame.values)
    assert train.timestamps.max() < val.timestamps.min() < test.timestamps.min()


def test_split_too_short():
    with pytest.raises(DataError, match="at least 5"):
        data.split_60_20_20(minute_frame(np.arange(4.0)))


def test_zscore_constant_variable_maps_to_zero():
    frame = minute_frame(np.full(6, 3.25))
    stats = data.zscore_fit(frame)
    out = data.zscore_apply(frame, stats)
    np.testing.assert_array_equal(out.values, np.zeros((6, 1)))


def test_zscore_hand_case():
    frame = minute_frame(np.array([0.0, 2.0]))
    stats = data.zscore_fit(frame)
    assert stats.mean[0] == 1.0 and stats.std[0] == 1.0
    out = data.zscore_apply(frame, stats)
    np.testing.assert_array_equal(out.values[:, 0], [-1.0, 1.0])


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_zscore_round_trip(seed):
    rng = np.random.default_rng(seed)
    frame = minute_frame(rng.normal(scale=rng.uniform(0.1, 50), size=(20, 3)))
    stats = data.zscore_fit(frame)
    back = data.zscore_invert(data.zscore_apply(frame, stats), stats)
    np.testing.assert_allclose(back.values, frame.values, atol=1e-9)


def test_zscore_dimension_mismatch():
    stats = data.zscore_fit(minute_frame(np.ones((6, 1))))
    with pytest.raises(ShapeError):
        data.zscore_apply(minute_frame(np.ones((6, 2))), stats)


def zero_labels(frame):
    return np.zeros_like(frame.values, dtype=np.int64)


def test_sliding_windows_count_and_content():
    frame = minute_frame(np.arange(5.0))
    samples = data.sliding_windows(frame, zero_labels(frame), 2, 1)
    assert len(samples) == 3
    np.testing.assert_array_equal(samples[0].x[:, 0], [0.0, 1.0])
    np.testing.assert_array_equal(samples[0].y[:, 0], [2.0])
    assert samples[0].origin == 2


def test_sliding_windows_boundary_single_sample():
    frame = minute_frame(np.arange(6.0))
    samples = data.sliding_windows(frame, zero_labels(frame), 4, 2)
    assert len(samples) == 1


@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 20))
@settings(max_examples=50, deadline=None)
def test_sliding_windows_count_formula(lookback, horizon, extra):
    l = lookback + horizon + extra
    frame = minute_frame(np.arange(float(l)))
    samples = data.sliding_windows(frame, zero_labels(frame), lookback, horizon)
    assert len(samples) == l - lookback - horizon + 1


def test_sliding_windows_too_short_names_minimum():
    frame = minute_frame(np.arange(4.0))
    with pytest.raises(DataError, match="L\\+H = 5"):
        data.sliding_windows(frame, zero_labels(frame), 3, 2)
