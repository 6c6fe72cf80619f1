"""Load-series ingestion, resampling, splitting, normalization, windowing.

CSV contract: UTF-8, comma-separated, header ``timestamp,<name1>,...,<nameD>``,
timestamps as integer epoch seconds, values as decimal floats. Rows with any
empty cell are rejected outright; silent imputation would corrupt downstream
state labeling.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, ShapeError

TRAIN_FRACTION = 0.6
VAL_FRACTION = 0.2
TEST_FRACTION = 0.2


@dataclass
class SeriesFrame:
    """A timestamped multivariate load series.

    timestamps: strictly increasing epoch seconds, shape (l,).
    values: float64 matrix, shape (l, D).
    variable_names: D column names.
    """

    timestamps: np.ndarray
    values: np.ndarray
    variable_names: list[str]

    def __post_init__(self) -> None:
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2:
            raise ShapeError(f"values must be 2-D, got shape {self.values.shape}")
        if len(self.timestamps) != self.values.shape[0]:
            raise ShapeError(
                f"{len(self.timestamps)} timestamps but {self.values.shape[0]} value rows"
            )
        if self.values.shape[1] != len(self.variable_names):
            raise ShapeError(
                f"{len(self.variable_names)} names but {self.values.shape[1]} value columns"
            )
        if len(self.timestamps) > 1 and not (np.diff(self.timestamps) > 0).all():
            raise DataError("timestamps must be strictly increasing")

    @property
    def length(self) -> int:
        return self.values.shape[0]

    @property
    def n_variables(self) -> int:
        return self.values.shape[1]


@dataclass
class NormStats:
    """Per-variable mean and std fitted on the training split.

    Stds below 1e-8 are stored clamped to 1e-8 so constant variables
    normalize to zero instead of dividing by zero.
    """

    mean: np.ndarray
    std: np.ndarray

    EPS = 1e-8


@dataclass
class WindowSample:
    """One training instance cut from a frame.

    x: lookback values, (L, D). y: target values, (H, D).
    s: target state labels, (H, D) ints. origin: the index t such that
    x covers rows [t-L, t) and y covers [t, t+H).
    """

    x: np.ndarray
    y: np.ndarray
    s: np.ndarray
    origin: int


def load_csv(path: str | Path) -> SeriesFrame:
    """Parse a load-series CSV into a SeriesFrame, sorting rows by timestamp."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if not header or header[0] != "timestamp":
            raise DataError(f"{path}: header must start with 'timestamp', got {header[:1]}")
        names = header[1:]
        if not names:
            raise DataError(f"{path}: no variable columns in header")
        timestamps: list[int] = []
        rows: list[list[float]] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(
                    f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}"
                )
            try:
                ts = int(row[0])
            except ValueError:
                raise DataError(
                    f"{path}:{lineno}: column 'timestamp': not an integer: {row[0]!r}"
                ) from None
            vals = []
            for name, cell in zip(names, row[1:]):
                if cell == "":
                    raise DataError(f"{path}:{lineno}: column {name!r}: empty cell")
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}:{lineno}: column {name!r}: not a number: {cell!r}"
                    ) from None
                if not np.isfinite(v):
                    raise DataError(f"{path}:{lineno}: column {name!r}: non-finite value {cell!r}")
                vals.append(v)
            timestamps.append(ts)
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    ts_arr = np.asarray(timestamps, dtype=np.int64)
    val_arr = np.asarray(rows, dtype=np.float64)
    order = np.argsort(ts_arr, kind="stable")
    ts_arr = ts_arr[order]
    val_arr = val_arr[order]
    dupes = np.nonzero(np.diff(ts_arr) == 0)[0]
    if dupes.size:
        raise DataError(f"{path}: duplicate timestamp {ts_arr[dupes[0]]}")
    return SeriesFrame(ts_arr, val_arr, list(names))


def save_csv(frame: SeriesFrame, path: str | Path) -> None:
    """Write a frame in the CSV contract; float cells use shortest round-trip repr."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as f:
        f.write("timestamp," + ",".join(frame.variable_names) + "\n")
        for ts, row in zip(frame.timestamps, frame.values):
            f.write(str(int(ts)) + "," + ",".join(repr(float(v)) for v in row) + "\n")


def align_and_downsample(frame: SeriesFrame, period_seconds: int = 3600) -> SeriesFrame:
    """Average values into fixed-period buckets anchored at the first timestamp.

    A trailing bucket that the observed range does not fully cover is
    dropped. The native sampling interval is taken as the smallest
    timestamp difference.
    """
    if frame.length == 0:
        raise DataError("cannot downsample an empty frame")
    t0 = int(frame.timestamps[0])
    if frame.length == 1:
        native = period_seconds
    else:
        native = int(np.diff(frame.timestamps).min())
    if period_seconds < native:
        raise DataError(
            f"period {period_seconds}s is finer than the native interval {native}s"
        )
    span_end = int(frame.timestamps[-1]) + native
    n_buckets = (span_end - t0) // period_seconds
    if n_buckets == 0:
        raise DataError(
            f"series spans {span_end - t0}s, shorter than one {period_seconds}s bucket"
        )
    bucket = (frame.timestamps - t0) // period_seconds
    keep = bucket < n_buckets
    idx = bucket[keep]
    counts = np.bincount(idx, minlength=n_buckets)
    if (counts == 0).any():
        empty = int(np.nonzero(counts == 0)[0][0])
        raise DataError(f"bucket {empty} (starting {t0 + empty * period_seconds}) has no readings")
    sums = np.zeros((n_buckets, frame.n_variables))
    np.add.at(sums, idx, frame.values[keep])
    means = sums / counts[:, None]
    new_ts = t0 + period_seconds * np.arange(n_buckets, dtype=np.int64)
    return SeriesFrame(new_ts, means, list(frame.variable_names))


def split_60_20_20(frame: SeriesFrame) -> tuple[SeriesFrame, SeriesFrame, SeriesFrame]:
    """Chronological 60/20/20 split at floor(0.6*l) and floor(0.8*l)."""
    l = frame.length
    if l < 5:
        raise DataError(f"need at least 5 rows to split, got {l}")
    i1 = (6 * l) // 10
    i2 = (8 * l) // 10
    parts = []
    for a, b in ((0, i1), (i1, i2), (i2, l)):
        parts.append(SeriesFrame(frame.timestamps[a:b], frame.values[a:b], list(frame.variable_names)))
    return parts[0], parts[1], parts[2]


def zscore_fit(train: SeriesFrame) -> NormStats:
    """Per-variable mean/std from the training split only."""
    mean = train.values.mean(axis=0)
    std = train.values.std(axis=0)
    return NormStats(mean, np.maximum(std, NormStats.EPS))


def _check_stats(frame: SeriesFrame, stats: NormStats) -> None:
    if stats.mean.shape != (frame.n_variables,):
        raise ShapeError(
            f"stats cover {stats.mean.shape[0]} variables but frame has {frame.n_variables}"
        )


def zscore_apply(frame: SeriesFrame, stats: NormStats) -> SeriesFrame:
    _check_stats(frame, stats)
    return SeriesFrame(
        frame.timestamps, (frame.values - stats.mean) / stats.std, list(frame.variable_names)
    )


def zscore_invert(frame: SeriesFrame, stats: NormStats) -> SeriesFrame:
    _check_stats(frame, stats)
    return SeriesFrame(
        frame.timestamps, frame.values * stats.std + stats.mean, list(frame.variable_names)
    )


def sliding_windows(frame: SeriesFrame, states, lookback: int, horizon: int) -> list[WindowSample]:
    """Cut every (lookback, horizon) sample from the frame, one step apart.

    states is a StateProfile (or a bare (l, D) int matrix) aligned with
    the frame; yields exactly l - lookback - horizon + 1 samples.
    """
    labels = np.asarray(getattr(states, "labels", states))
    l = frame.length
    if lookback < 1 or horizon < 1:
        raise ShapeError(f"lookback and horizon must be >= 1, got L={lookback}, H={horizon}")
    if labels.shape != frame.values.shape:
        raise ShapeError(
            f"state labels shape {labels.shape} does not match values {frame.values.shape}"
        )
    if l < lookback + horizon:
        raise DataError(
            f"series length {l} is below the minimum L+H = {lookback + horizon}"
        )
    samples = []
    for k in range(l - lookback - horizon + 1):
        t = k + lookback
        samples.append(
            WindowSample(
                x=frame.values[k:t],
                y=frame.values[t : t + horizon],
                s=labels[t : t + horizon],
                origin=t,
            )
        )
    return samples
