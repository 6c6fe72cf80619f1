"""Appliance state labeling: per-variable k-means over sliding windows,
with silhouette-score selection of the state count.

Each variable of a load series is embedded as one window per time step
(forward windows, with trailing windows reused at the tail), clustered
for every candidate state count, and the count with the best silhouette
wins. Cluster ids are then canonicalized by ascending centroid mean so
label 0 is always the lowest-power state.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import SeriesFrame
from .errors import ConfigError, DataError, ShapeError

DEFAULT_WINDOW = 24
DEFAULT_MIN_STATES = 2
DEFAULT_MAX_STATES = 5

# Silhouette is O(n^2); k selection above this many windows runs on a
# seeded subsample instead (labels themselves always cover every row).
SILHOUETTE_CAP = 2048


@dataclass
class StateProfile:
    """Per-step, per-variable integer state labels plus state counts.

    labels: (l, D) int matrix, variable i taking values in [0, counts[i]).
    counts: length-D state counts, each in [2, 5] when produced by
    identify_states with the default bounds.
    """

    labels: np.ndarray
    counts: np.ndarray

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.labels.ndim != 2 or self.counts.shape != (self.labels.shape[1],):
            raise ShapeError(
                f"labels {self.labels.shape} inconsistent with counts {self.counts.shape}"
            )
        if self.labels.size and (
            (self.labels < 0).any() or (self.labels >= self.counts[None, :]).any()
        ):
            bad = np.argwhere((self.labels < 0) | (self.labels >= self.counts[None, :]))[0]
            raise ShapeError(
                f"label {self.labels[tuple(bad)]} out of range for variable {bad[1]} "
                f"with {self.counts[bad[1]]} states"
            )


@dataclass
class KMeansResult:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    inertia_history: list[float]
    n_iter: int


def embed_windows(series: np.ndarray, w: int) -> np.ndarray:
    """One width-w window per time step of a univariate series.

    Row t holds series[t:t+w]; past the last full forward window the row
    holds the window ending at t (clamped to the series start), so every
    row has width w and the tail reuses trailing values.
    """
    series = np.asarray(series, dtype=np.float64).reshape(-1)
    l = series.shape[0]
    if w < 1:
        raise ConfigError(f"window size must be >= 1, got {w}")
    if w > l:
        raise ConfigError(f"window size {w} exceeds series length {l}")
    t = np.arange(l)
    starts = np.where(t <= l - w, t, np.maximum(0, t - w + 1))
    return series[starts[:, None] + np.arange(w)]


def _pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # |a-b|^2 = |a|^2 + |b|^2 - 2ab, clipped against rounding
    d = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.maximum(d, 0.0)


def _exact_dists(rows: np.ndarray) -> np.ndarray:
    """Pairwise Euclidean distances via explicit differences, chunked.

    The quadratic-form shortcut loses ~1e-13 to cancellation when
    points are close relative to their magnitude; silhouette promises
    exact agreement with the textbook definition, so pay for precision.
    """
    n, dim = rows.shape
    out = np.empty((n, n))
    chunk = max(1, (1 << 22) // max(1, n * dim))
    for start in range(0, n, chunk):
        block = rows[start : start + chunk]
        d2 = ((block[:, None, :] - rows[None, :, :]) ** 2).sum(axis=-1)
        out[start : start + chunk] = np.sqrt(d2)
    return out


def _kmeans_pp_init(rows: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = rows.shape[0]
    centroids = np.empty((k, rows.shape[1]))
    first = int(rng.integers(n))
    centroids[0] = rows[first]
    sq = _pairwise_sq_dists(rows, centroids[:1]).ravel()
    for j in range(1, k):
        total = sq.sum()
        if total <= 0.0:
            # all remaining points coincide with a chosen centroid
            nxt = int(rng.integers(n))
        else:
            nxt = int(rng.choice(n, p=sq / total))
        centroids[j] = rows[nxt]
        sq = np.minimum(sq, _pairwise_sq_dists(rows, centroids[j : j + 1]).ravel())
    return centroids


def kmeans(embedding: np.ndarray, k: int, seed: int, max_iter: int = 100) -> KMeansResult:
    """Lloyd's algorithm with k-means++ seeding on flattened windows.

    Converges when assignments stop changing or max_iter is hit. An
    empty cluster is reseeded to the point farthest from its assigned
    centroid. Inertia is the sum of squared distances to assigned
    centroids, recorded once per assignment pass.
    """
    rows = np.asarray(embedding, dtype=np.float64)
    if rows.ndim != 2:
        raise ShapeError(f"embedding must be 2-D, got shape {rows.shape}")
    n_distinct = np.unique(rows, axis=0).shape[0]
    if not 1 <= k <= n_distinct:
        raise ConfigError(f"k={k} outside [1, {n_distinct}] distinct rows")
    rng = np.random.default_rng(seed)
    centroids = _kmeans_pp_init(rows, k, rng)
    assignments = np.full(rows.shape[0], -1, dtype=np.int64)
    history: list[float] = []
    n_iter = 0
    for n_iter in range(1, max_iter + 1):
        sq = _pairwise_sq_dists(rows, centroids)
        new_assign = sq.argmin(axis=1)
        point_sq = sq[np.arange(rows.shape[0]), new_assign]
        for c in range(k):
            if not (new_assign == c).any():
                far = int(point_sq.argmax())
                centroids[c] = rows[far]
                sq[:, c] = _pairwise_sq_dists(rows, centroids[c : c + 1]).ravel()
                new_assign = sq.argmin(axis=1)
                point_sq = sq[np.arange(rows.shape[0]), new_assign]
        history.append(float(point_sq.sum()))
        if (new_assign == assignments).all():
            assignments = new_assign
            break
        assignments = new_assign
        for c in range(k):
            centroids[c] = rows[assignments == c].mean(axis=0)
    return KMeansResult(assignments, centroids, history[-1], history, n_iter)


def silhouette(embedding: np.ndarray, assignments: np.ndarray) -> float:
    """Mean silhouette value (b-a)/max(a,b) over all points.

    a is the mean distance to the point's own cluster (excluding
    itself), b the smallest mean distance to another cluster. Points in
    singleton clusters, and points with max(a,b)=0, contribute 0.
    """
    rows = np.asarray(embedding, dtype=np.float64)
    assignments = np.asarray(assignments)
    if assignments.shape != (rows.shape[0],):
        raise ShapeError(f"{assignments.shape} assignments for {rows.shape[0]} rows")
    labels, counts = np.unique(assignments, return_counts=True)
    if labels.size < 2:
        raise ConfigError(f"silhouette needs >= 2 clusters, got {labels.size}")
    dist = _exact_dists(rows)
    np.fill_diagonal(dist, 0.0)
    n = rows.shape[0]
    # per-point summed distance to each cluster
    sums = np.zeros((n, labels.size))
    for j, lab in enumerate(labels):
        sums[:, j] = dist[:, assignments == lab].sum(axis=1)
    scores = np.zeros(n)
    for j, lab in enumerate(labels):
        members = assignments == lab
        if counts[j] == 1:
            continue  # singleton: s = 0
        a = sums[members, j] / (counts[j] - 1)
        other = np.ones(labels.size, dtype=bool)
        other[j] = False
        b = (sums[members][:, other] / counts[other]).min(axis=1)
        denom = np.maximum(a, b)
        with np.errstate(invalid="ignore", divide="ignore"):
            s = np.where(denom > 0, (b - a) / denom, 0.0)
        scores[members] = s
    return float(scores.mean())


def _selection_indices(n: int, cap: int, rng: np.random.Generator, assignments: np.ndarray) -> np.ndarray:
    if n <= cap:
        return np.arange(n)
    idx = np.sort(rng.choice(n, size=cap, replace=False))
    present = np.unique(assignments[idx])
    missing = np.setdiff1d(np.unique(assignments), present)
    if missing.size:
        extras = [int(np.nonzero(assignments == m)[0][0]) for m in missing]
        idx = np.sort(np.concatenate([idx, np.asarray(extras, dtype=idx.dtype)]))
    return idx


def identify_states(
    frame: SeriesFrame,
    w: int = DEFAULT_WINDOW,
    min_s: int = DEFAULT_MIN_STATES,
    max_s: int = DEFAULT_MAX_STATES,
    seed: int = 0,
    silhouette_cap: int = SILHOUETTE_CAP,
) -> StateProfile:
    """Label every (step, variable) with a state id, choosing each
    variable's state count by silhouette score over [min_s, max_s].

    Ties keep the smallest k. Labels are canonicalized so centroid
    means are non-decreasing in label id. Deterministic for a given
    seed; k-means and subsample seeds are derived per (variable, k).
    """
    if min_s < 2:
        raise ConfigError(f"min_s must be >= 2, got {min_s}")
    if max_s < min_s:
        raise ConfigError(f"max_s={max_s} below min_s={min_s}")
    l, d = frame.values.shape
    labels = np.zeros((l, d), dtype=np.int64)
    counts = np.zeros(d, dtype=np.int64)
    for i in range(d):
        embedding = embed_windows(frame.values[:, i], w)
        best_score = -np.inf
        best: KMeansResult | None = None
        best_k = 0
        for k in range(min_s, max_s + 1):
            child = np.random.SeedSequence(entropy=(seed, i, k)).generate_state(1)[0]
            result = kmeans(embedding, k, seed=int(child))
            sub_rng = np.random.default_rng(np.random.SeedSequence(entropy=(seed, i, k, 1)))
            idx = _selection_indices(l, silhouette_cap, sub_rng, result.assignments)
            score = silhouette(embedding[idx], result.assignments[idx])
            if score > best_score:
                best_score, best, best_k = score, result, k
        assert best is not None
        order = np.argsort(best.centroids.mean(axis=1), kind="stable")
        remap = np.empty(best_k, dtype=np.int64)
        remap[order] = np.arange(best_k)
        labels[:, i] = remap[best.assignments]
        counts[i] = best_k
    return StateProfile(labels, counts)


def save_states_csv(profile: StateProfile, frame: SeriesFrame, path: str | Path) -> None:
    """Persist labels as CSV (same header/timestamps as the frame) plus a
    JSON sidecar <path>.meta.json listing the state count per variable."""
    path = Path(path)
    if profile.labels.shape != frame.values.shape:
        raise ShapeError(
            f"labels {profile.labels.shape} do not match frame values {frame.values.shape}"
        )
    with path.open("w", newline="", encoding="utf-8") as f:
        f.write("timestamp," + ",".join(frame.variable_names) + "\n")
        for ts, row in zip(frame.timestamps, profile.labels):
            f.write(str(int(ts)) + "," + ",".join(str(int(v)) for v in row) + "\n")
    meta = [
        {"name": name, "states": int(n)}
        for name, n in zip(frame.variable_names, profile.counts)
    ]
    sidecar = path.with_suffix(path.suffix + ".meta.json")
    sidecar.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def load_states_csv(path: str | Path) -> tuple[StateProfile, np.ndarray, list[str]]:
    """Read a state CSV and its sidecar; returns (profile, timestamps, names)."""
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    sidecar = path.with_suffix(path.suffix + ".meta.json")
    if not sidecar.exists():
        raise DataError(f"missing sidecar metadata: {sidecar}")
    meta = json.loads(sidecar.read_text(encoding="utf-8"))
    with path.open(newline="", encoding="utf-8") as f:
        header = f.readline().rstrip("\n").split(",")
        if header[:1] != ["timestamp"]:
            raise DataError(f"{path}: header must start with 'timestamp'")
        names = header[1:]
        body = np.loadtxt(f, delimiter=",", dtype=np.int64, ndmin=2)
    if body.size == 0:
        raise DataError(f"{path}: no data rows")
    meta_names = [m["name"] for m in meta]
    if meta_names != names:
        raise DataError(f"{path}: sidecar names {meta_names} do not match header {names}")
    counts = np.asarray([m["states"] for m in meta], dtype=np.int64)
    profile = StateProfile(body[:, 1:], counts)
    return profile, body[:, 0], names
