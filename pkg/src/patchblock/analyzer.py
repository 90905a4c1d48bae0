"""Mahalanobis-distance diagnostic over segment vectors.

Fits a mean/covariance model to the segments of one image, scores each
segment by d_M(x) = sqrt((x-mu)^T S^-1 (x-mu)), and reports whether the
score distribution splits into two well-separated groups. Segment vectors
are much longer than the sample count (e.g. 4800-dim from 576 windows),
so the sample covariance is singular; a convex shrinkage toward a scaled
identity keeps the matrix positive definite while preserving the
quadratic-form structure.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .segmenter import SegmentGrid

# positive-definite fallback scale for data with exactly zero variance
_IDENTITY_FLOOR = 1e-12

_SEPARATION_EPS = 1e-12
BIMODAL_SEPARATION = 2.0

HISTOGRAM_HEADER = ("bin_left", "bin_right", "count")


@dataclass
class SegmentDistribution:
    """Fitted mean and shrunk covariance, Cholesky-factored once at construction.

    `basis` is set only when the fit projected onto principal components
    first; scoring then happens in the projected space.
    """

    mean: np.ndarray
    covariance: np.ndarray
    shrinkage_lambda: float
    sample_count: int
    basis: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        cov = np.atleast_2d(np.asarray(self.covariance, dtype=np.float64))
        if cov.shape[0] != cov.shape[1]:
            raise ValueError(f"covariance must be square, got {cov.shape}")
        try:
            self._cho = cho_factor(cov, lower=True)
        except np.linalg.LinAlgError as exc:
            raise ValueError(
                "covariance is not positive definite; fit with shrinkage_lambda > 0"
            ) from exc
        self.covariance = cov

    def _center(self, x: np.ndarray) -> np.ndarray:
        delta = np.asarray(x, dtype=np.float64) - self.mean
        if self.basis is not None:
            delta = delta @ self.basis.T
        return delta


@dataclass(frozen=True)
class DistanceReport:
    """Per-segment distances plus a two-group split summary."""

    distances: np.ndarray
    modality: str  # "unimodal" or "bimodal"
    separation_score: float
    threshold: float


def fit_distribution(
    grid: SegmentGrid | np.ndarray,
    shrinkage_lambda: float = 0.1,
    pca_variance: float | None = None,
) -> SegmentDistribution:
    """Fit mean and shrunk covariance to segment vectors.

    Covariance = (1-lambda) * S_sample + lambda * (tr(S_sample)/d) * I,
    positive definite for lambda > 0. With `pca_variance` set (e.g. 0.95),
    vectors are first projected onto the leading principal components
    capturing that variance fraction, and the model lives in that space.
    """
    vectors = grid.vectors if isinstance(grid, SegmentGrid) else np.asarray(grid, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[0] < 2:
        raise ValueError("need at least 2 segment vectors to fit a distribution")
    if not 0.0 <= shrinkage_lambda <= 1.0:
        raise ValueError(f"shrinkage_lambda must be in [0, 1], got {shrinkage_lambda}")

    mean = vectors.mean(axis=0)
    centered = vectors - mean
    basis = None
    if pca_variance is not None:
        if not 0.0 < pca_variance <= 1.0:
            raise ValueError(f"pca_variance must be in (0, 1], got {pca_variance}")
        _, svals, vt = np.linalg.svd(centered, full_matrices=False)
        energy = np.cumsum(svals**2)
        total = energy[-1]
        if total == 0.0:
            rank = 1
        else:
            rank = int(np.searchsorted(energy, pca_variance * total) + 1)
        basis = vt[:rank]
        centered = centered @ basis.T

    n, d = centered.shape
    sample_cov = (centered.T @ centered) / (n - 1)
    scale = float(np.trace(np.atleast_2d(sample_cov))) / d
    if shrinkage_lambda > 0.0:
        scale = max(scale, _IDENTITY_FLOOR)
    shrunk = (1.0 - shrinkage_lambda) * sample_cov
    shrunk = np.atleast_2d(shrunk)
    shrunk[np.diag_indices_from(shrunk)] += shrinkage_lambda * scale
    return SegmentDistribution(
        mean=mean,
        covariance=shrunk,
        shrinkage_lambda=shrinkage_lambda,
        sample_count=n,
        basis=basis,
    )


def mahalanobis(x: np.ndarray, dist: SegmentDistribution) -> float:
    """d_M(x) = sqrt((x-mu)^T S^-1 (x-mu)), evaluated against the stored factorization."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != np.shape(dist.mean):
        raise ValueError(f"vector shape {x.shape} does not match mean {np.shape(dist.mean)}")
    delta = dist._center(x)
    y = cho_solve(dist._cho, delta)
    return float(np.sqrt(max(float(delta @ y), 0.0)))


def mahalanobis_scores(vectors: np.ndarray, dist: SegmentDistribution) -> np.ndarray:
    """Vectorized d_M for each row of `vectors`."""
    vectors = np.asarray(vectors, dtype=np.float64)
    if vectors.ndim != 2 or vectors.shape[1] != len(dist.mean):
        raise ValueError(f"expected (m, {len(dist.mean)}) vectors, got {vectors.shape}")
    deltas = dist._center(vectors)
    ys = cho_solve(dist._cho, deltas.T)
    quad = np.einsum("ij,ji->i", deltas, ys)
    return np.sqrt(np.clip(quad, 0.0, None))


def _best_two_split(sorted_vals: np.ndarray) -> int:
    """Split index minimizing total within-group sum of squares (exact 1-D 2-means)."""
    n = len(sorted_vals)
    prefix = np.cumsum(sorted_vals)
    prefix_sq = np.cumsum(sorted_vals**2)
    t = np.arange(1, n)
    left_sse = prefix_sq[t - 1] - prefix[t - 1] ** 2 / t
    right_n = n - t
    right_sum = prefix[-1] - prefix[t - 1]
    right_sse = (prefix_sq[-1] - prefix_sq[t - 1]) - right_sum**2 / right_n
    return int(np.argmin(left_sse + right_sse) + 1)


def modality_report(distances: np.ndarray) -> DistanceReport:
    """Two-group split of the distances with an Ashman-style separation score.

    separation = |m2 - m1| / (s1 + s2 + eps); bimodal iff separation > 2.
    """
    distances = np.asarray(distances, dtype=np.float64).ravel()
    if distances.size < 4:
        raise ValueError(f"need at least 4 distances, got {distances.size}")
    ordered = np.sort(distances)
    split = _best_two_split(ordered)
    lo, hi = ordered[:split], ordered[split:]
    m1, m2 = float(lo.mean()), float(hi.mean())
    s1, s2 = float(lo.std()), float(hi.std())
    separation = abs(m2 - m1) / (s1 + s2 + _SEPARATION_EPS)
    return DistanceReport(
        distances=distances,
        modality="bimodal" if separation > BIMODAL_SEPARATION else "unimodal",
        separation_score=separation,
        threshold=(m1 + m2) / 2.0,
    )


def export_histogram(distances: np.ndarray, path: str | os.PathLike, bins: int) -> None:
    """Write histogram rows (bin_left, bin_right, count) over [min, max] as CSV.

    All-equal input degenerates to a single bin holding every count.
    """
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    distances = np.asarray(distances, dtype=np.float64).ravel()
    if distances.size == 0:
        raise ValueError("cannot histogram an empty distance list")
    lo, hi = float(distances.min()), float(distances.max())
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(HISTOGRAM_HEADER)
        if lo == hi:
            writer.writerow([repr(lo), repr(hi), distances.size])
            return
        counts, edges = np.histogram(distances, bins=bins, range=(lo, hi))
        for i, count in enumerate(counts):
            writer.writerow([repr(float(edges[i])), repr(float(edges[i + 1])), int(count)])
