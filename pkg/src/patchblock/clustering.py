"""Isolating phase core: DBSCAN over segment vectors.

Density-based clustering with the canonical semantics: a core point has at
least `min_pts` points (itself included) within `eps`; clusters are maximal
sets of density-connected points; anything not reachable from a core point
gets the distinguished NOISE label. Cluster ids run 1..C, and border points
reachable from several clusters go to whichever core point claims them
first in ascending scan order, so labelings are reproducible.

The default distance is dimension-normalized Euclidean (RMS), which keeps
segment distances on a [0, 1]-ish scale regardless of vector length; raw
Euclidean and cosine are available as alternatives.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

NOISE = 0
_UNDEFINED = -1

DISTANCE_KINDS = ("rms", "euclidean", "cosine")

# above this many points the full n*n matrix is not precomputed by default
_PRECOMPUTE_LIMIT = 4096


@dataclass(frozen=True)
class ClusterParams:
    """DBSCAN hyper-parameters: neighborhood radius and minimum neighborhood size."""

    eps: float
    min_pts: int

    def __post_init__(self) -> None:
        if self.eps <= 0:
            raise ValueError(f"eps must be positive, got {self.eps}")
        if self.min_pts < 1:
            raise ValueError(f"min_pts must be >= 1, got {self.min_pts}")


@dataclass(frozen=True)
class ClusterLabels:
    """Per-point assignment: NOISE (0) or a cluster id in 1..cluster_count."""

    labels: np.ndarray
    cluster_count: int

    def __len__(self) -> int:
        return len(self.labels)


def distance(a: np.ndarray, b: np.ndarray, kind: str = "rms") -> float:
    """Distance between two equal-length vectors under the chosen kind.

    rms: sqrt(sum((a-b)^2) / d) -- Euclidean normalized by sqrt(dimension).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"vector length mismatch: {a.shape} vs {b.shape}")
    if kind == "rms":
        return float(np.sqrt(np.mean((a - b) ** 2)))
    if kind == "euclidean":
        return float(np.sqrt(np.sum((a - b) ** 2)))
    if kind == "cosine":
        return float(_cosine_rows(a[None, :], b[None, :])[0, 0])
    raise ValueError(f"unknown distance kind {kind!r}")


def _cosine_rows(xa: np.ndarray, xb: np.ndarray) -> np.ndarray:
    """Cosine distance matrix, with zero vectors treated as identical to each other."""
    na = np.linalg.norm(xa, axis=1)
    nb = np.linalg.norm(xb, axis=1)
    denom = np.outer(na, nb)
    with np.errstate(invalid="ignore", divide="ignore"):
        sim = (xa @ xb.T) / denom
    d = 1.0 - np.clip(sim, -1.0, 1.0)
    zero_a = na == 0
    zero_b = nb == 0
    d[np.ix_(zero_a, ~zero_b)] = 1.0
    d[np.ix_(~zero_a, zero_b)] = 1.0
    d[np.ix_(zero_a, zero_b)] = 0.0
    return d


def distance_rows(points: np.ndarray, rows: np.ndarray, kind: str = "rms") -> np.ndarray:
    """Distances from each of `rows` (m, d) to every point (n, d), as (m, n)."""
    if kind == "rms":
        return cdist(rows, points, "euclidean") / np.sqrt(points.shape[1])
    if kind == "euclidean":
        return cdist(rows, points, "euclidean")
    if kind == "cosine":
        return _cosine_rows(rows, points)
    raise ValueError(f"unknown distance kind {kind!r}")


def pairwise_distances(points: np.ndarray, kind: str = "rms") -> np.ndarray:
    """Full symmetric (n, n) distance matrix."""
    return distance_rows(points, points, kind)


def region_query(
    points: np.ndarray,
    q: int,
    eps: float,
    kind: str = "rms",
    dist_matrix: np.ndarray | None = None,
) -> np.ndarray:
    """Indices (ascending, q included) of all points within eps of point q."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 0 <= q < n:
        raise IndexError(f"query index {q} out of range for {n} points")
    if dist_matrix is not None:
        row = dist_matrix[q]
    else:
        row = distance_rows(points, points[q : q + 1], kind)[0]
    return np.flatnonzero(row <= eps)


def dbscan(
    points: np.ndarray,
    params: ClusterParams,
    kind: str = "rms",
    precompute: bool | None = None,
) -> ClusterLabels:
    """Cluster `points` (n, d); NOISE label for points reachable from no core point.

    `precompute=None` builds the full distance matrix when n is small enough;
    the on-demand path computes one distance row per query and yields
    identical labels.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[0] == 0:
        raise ValueError("points must be a nonempty (n, d) array")
    n = points.shape[0]
    if precompute is None:
        precompute = n <= _PRECOMPUTE_LIMIT
    dist_matrix = pairwise_distances(points, kind) if precompute else None

    labels = np.full(n, _UNDEFINED, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != _UNDEFINED:
            continue
        neighbors = region_query(points, i, params.eps, kind, dist_matrix)
        if neighbors.size < params.min_pts:
            labels[i] = NOISE
            continue
        cluster += 1
        labels[i] = cluster
        seeds = deque(int(j) for j in neighbors if j != i)
        while seeds:
            j = seeds.popleft()
            if labels[j] == NOISE:
                labels[j] = cluster  # border point claimed by first reaching cluster
            if labels[j] != _UNDEFINED:
                continue
            labels[j] = cluster
            j_neighbors = region_query(points, j, params.eps, kind, dist_matrix)
            if j_neighbors.size >= params.min_pts:
                seeds.extend(int(m) for m in j_neighbors if labels[m] <= NOISE)
    return ClusterLabels(labels=labels, cluster_count=cluster)


def extract_noise(labels: ClusterLabels) -> np.ndarray:
    """Ascending indices of the points labeled NOISE."""
    return np.flatnonzero(labels.labels == NOISE)
