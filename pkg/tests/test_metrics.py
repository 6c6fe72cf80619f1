"""Metric exactness and improvement-summary tests."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from loadcast import metrics
from loadcast.errors import DataError, ShapeError


def test_mae_zero_on_equal():
    y = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert metrics.mae(y, y) == 0.0


def test_mae_hand_case():
    yhat = np.array([[1.0, 2.0], [3.0, 4.0]])
    y = np.array([[0.0, 2.0], [3.0, 2.0]])
    assert metrics.mae(yhat, y) == 0.75


def test_mae_permutation_invariance():
    rng = np.random.default_rng(0)
    yhat = rng.normal(size=12)
    y = rng.normal(size=12)
    perm = rng.permutation(12)
    assert metrics.mae(yhat, y) == pytest.approx(metrics.mae(yhat[perm], y[perm]), abs=1e-15)


def test_mae_shape_mismatch():
    with pytest.raises(ShapeError):
        metrics.mae(np.ones((2, 2)), np.ones((2, 3)))


def test_mape_sym_zero_on_equal_nonzero():
    y = np.array([[1.0, -2.0]])
    assert metrics.mape_sym(y, y) == 0.0


def test_mape_sym_hand_cases():
    assert metrics.mape_sym(np.array([2.0]), np.array([0.0])) == 1.0
    assert metrics.mape_sym(np.array([1.0]), np.array([3.0])) == 0.5


def test_mape_sym_bounded_by_one():
    rng = np.random.default_rng(1)
    for _ in range(1000):
        shape = (int(rng.integers(1, 5)), int(rng.integers(1, 5)))
        yhat = rng.normal(scale=10, size=shape)
        y = rng.normal(scale=10, size=shape)
        assert metrics.mape_sym(yhat, y) <= 1.0


def test_mape_sym_all_zero_denominator():
    with pytest.raises(DataError, match="undefined"):
        metrics.mape_sym(np.zeros(3), np.zeros(3))


def test_mape_sym_zero_cells_contribute_nothing():
    # one 0/0 cell alongside a real one: ratio over the real cell only
    yhat = np.array([0.0, 1.0])
    y = np.array([0.0, 3.0])
    assert metrics.mape_sym(yhat, y) == 0.5


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_mae_triangle_inequality(seed):
    rng = np.random.default_rng(seed)
    a, b, c = rng.normal(size=(3, 8))
    assert metrics.mae(a, c) <= metrics.mae(a, b) + metrics.mae(b, c) + 1e-12


def make_report(horizons, mae_vals, mape_vals):
    return metrics.EvalReport(list(horizons), list(mae_vals), list(mape_vals))


def test_percent_improvement_identical_reports():
    r = make_report([1, 6], [0.5, 0.6], [0.9, 1.0])
    imp = metrics.percent_improvement(r, r)
    assert imp.average["mae"] == 0.0 and imp.average["mape_sym"] == 0.0


def test_percent_improvement_tabled_value():
    baseline = make_report([1], [0.520], [1.074])
    treated = make_report([1], [0.352], [0.669])
    imp = metrics.percent_improvement(baseline, treated)
    assert imp.average["mae"] == pytest.approx(32.3, abs=0.05)


def test_percent_improvement_sign_convention():
    baseline = make_report([1], [0.5], [0.9])
    worse = make_report([1], [0.6], [1.0])
    imp = metrics.percent_improvement(baseline, worse)
    assert imp.average["mae"] < 0.0


def test_percent_improvement_zero_baseline():
    with pytest.raises(DataError, match="zero"):
        metrics.percent_improvement(make_report([1], [0.0], [0.5]), make_report([1], [0.1], [0.4]))


def test_percent_improvement_horizon_mismatch():
    with pytest.raises(ShapeError):
        metrics.percent_improvement(
            make_report([1], [0.5], [0.9]), make_report([2], [0.4], [0.8])
        )


def test_report_csv_round_trip(tmp_path):
    report = metrics.EvalReport([1, 6], [0.5, 0.6], [0.9, 1.0], [5.0, 6.0], [0.8, 0.9])
    path = tmp_path / "report.csv"
    metrics.save_report_csv(report, path)
    back = metrics.load_report_csv(path)
    assert back == report


def test_comparison_csv_row_count(tmp_path):
    baseline = make_report([1, 6, 12], [0.5, 0.6, 0.7], [0.9, 1.0, 1.1])
    treated = make_report([1, 6, 12], [0.4, 0.55, 0.71], [0.8, 0.95, 1.12])
    imp = metrics.percent_improvement(baseline, treated)
    path = tmp_path / "cmp.csv"
    metrics.save_comparison_csv(baseline, treated, imp, path)
    lines = path.read_text().strip().splitlines()
    assert len(lines) == 1 + 3 + 1  # header + horizons + avg row
    assert lines[-1].startswith("avg,")
