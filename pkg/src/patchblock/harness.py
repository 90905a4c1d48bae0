"""Corpus-level evaluation: inject, defend, score, aggregate.

Ground truth comes from the injector's exact masks, so detection quality
is measured directly: precision/recall over segments (a segment counts as
truly patched when at least `tau` of its footprint lies on the patch),
pixel IoU, and the fraction of patch pixels recovered by the anomaly mask.
Clean passes measure the false-positive segment rate. Undefined metrics
(e.g. recall on a clean image) are NaN in memory and empty fields in CSV;
aggregates are NaN-aware means.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, replace

import numpy as np

from . import __version__
from .attacksim import PatchSpec, make_patch
from .clustering import ClusterParams, pairwise_distances
from .defense import DefenseConfig, DefenseOutcome, defend
from .imagecore import load_image, validate_mask
from .segmenter import SegmentGrid, segment

log = logging.getLogger(__name__)

METRICS_HEADER = (
    "file",
    "seg_precision",
    "seg_recall",
    "pixel_iou",
    "patch_pixel_recall",
    "clean_fp_rate",
)
AGGREGATE_HEADER = ("metric", "value")

DEFAULT_OVERLAP_TAU = 0.25
EPS_FLOOR = 1e-6
DEFAULT_RHO = 0.6
CALIBRATION_PERCENTILE = 95


@dataclass(frozen=True)
class DetectionMetrics:
    """Scores for one defended image; NaN marks not-applicable fields."""

    segment_precision: float
    segment_recall: float
    pixel_iou: float
    patch_pixel_recall: float
    clean_fp_segment_rate: float


@dataclass(frozen=True)
class RunManifest:
    """Everything needed to reproduce an evaluation run bit-identically."""

    defense: dict
    patch: dict
    corpus: list[str]
    seed: int
    tool_version: str

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunManifest":
        return cls(**json.loads(text))


def _segment_truth_overlap(grid: SegmentGrid, truth: np.ndarray) -> np.ndarray:
    """Fraction of each segment's footprint covered by the truth mask."""
    k = grid.kernel
    area = float(k * k)
    fractions = np.empty(len(grid))
    for i, (r, c) in enumerate(grid.origins):
        fractions[i] = truth[r : r + k, c : c + k].sum() / area
    return fractions


def score(
    outcome: DefenseOutcome,
    truth: np.ndarray,
    grid: SegmentGrid,
    tau: float = DEFAULT_OVERLAP_TAU,
) -> DetectionMetrics:
    """Compare flagged segments and the anomaly mask against the truth mask."""
    h, w, _ = grid.source_dims
    validate_mask(truth, shape=(h, w))
    if outcome.anomaly_mask.shape != truth.shape:
        raise ValueError("anomaly mask and truth mask dimensions disagree")

    n = len(grid)
    flagged = np.zeros(n, dtype=bool)
    flagged[outcome.anomalous_segment_indices] = True
    nan = float("nan")

    if truth.sum() == 0:
        return DetectionMetrics(
            segment_precision=nan,
            segment_recall=nan,
            pixel_iou=nan,
            patch_pixel_recall=nan,
            clean_fp_segment_rate=float(flagged.sum()) / n,
        )

    positive = _segment_truth_overlap(grid, truth) >= tau
    tp = int((flagged & positive).sum())
    fp = int((flagged & ~positive).sum())
    fn = int((~flagged & positive).sum())
    precision = tp / (tp + fp) if (tp + fp) else nan
    recall = tp / (tp + fn) if (tp + fn) else nan

    anomaly = outcome.anomaly_mask.astype(bool)
    truth_b = truth.astype(bool)
    inter = int((anomaly & truth_b).sum())
    union = int((anomaly | truth_b).sum())
    return DetectionMetrics(
        segment_precision=precision,
        segment_recall=recall,
        pixel_iou=inter / union if union else nan,
        patch_pixel_recall=inter / int(truth_b.sum()),
        clean_fp_segment_rate=nan,
    )


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _fmt(value: float | int | str) -> str:
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def _per_image_seed(base: int, index: int) -> int:
    return int(np.random.SeedSequence((base, index)).generate_state(1)[0])


def list_corpus(corpus_dir: str | os.PathLike) -> list[str]:
    files = sorted(
        f for f in os.listdir(corpus_dir) if f.lower().endswith(".png")
    )
    return [os.path.join(os.fspath(corpus_dir), f) for f in files]


@dataclass(frozen=True)
class EvalSummary:
    metrics_path: str
    aggregate_path: str
    manifest_path: str
    rows: list[dict]
    aggregates: dict[str, float]
    errors: list[tuple[str, str]]


def evaluate(
    corpus_dir: str | os.PathLike,
    cfg: DefenseConfig,
    patch_spec: PatchSpec,
    out_dir: str | os.PathLike,
    sizes: list[int] | None = None,
) -> EvalSummary:
    """Clean-pass and patched-pass every corpus image; write metrics and manifest.

    Each image i gets a patch seed derived from (patch_spec.seed, i), and a
    size cycled from `sizes` when given, so reruns with the same manifest
    are byte-identical. Outputs in `out_dir`: metrics.csv (one row per
    image), aggregate.csv (NaN-aware means), manifest.json, and Mahalanobis
    histograms for the first image's clean and patched passes.
    """
    paths = list_corpus(corpus_dir)
    if not paths:
        raise ValueError(f"no PNG images found in {corpus_dir}")
    out_dir = os.fspath(out_dir)
    os.makedirs(out_dir, exist_ok=True)

    manifest = RunManifest(
        defense=asdict(cfg),
        patch=asdict(patch_spec),
        corpus=[os.path.basename(p) for p in paths],
        seed=patch_spec.seed,
        tool_version=__version__,
    )

    rows: list[dict] = []
    errors: list[tuple[str, str]] = []
    for i, path in enumerate(paths):
        name = os.path.basename(path)
        try:
            img = load_image(path)
            clean_outcome = defend(img, cfg)
            empty = np.zeros(img.shape[:2], dtype=np.uint8)
            clean_metrics = score(clean_outcome, empty, clean_outcome.grid)

            spec_i = replace(
                patch_spec,
                seed=_per_image_seed(patch_spec.seed, i),
                size=sizes[i % len(sizes)] if sizes else patch_spec.size,
            )
            patched, truth = make_patch(spec_i, img)
            patched_outcome = defend(patched, cfg)
            patched_metrics = score(patched_outcome, truth, patched_outcome.grid)

            rows.append(
                {
                    "file": name,
                    "seg_precision": patched_metrics.segment_precision,
                    "seg_recall": patched_metrics.segment_recall,
                    "pixel_iou": patched_metrics.pixel_iou,
                    "patch_pixel_recall": patched_metrics.patch_pixel_recall,
                    "clean_fp_rate": clean_metrics.clean_fp_segment_rate,
                }
            )
            if i == 0:
                _write_pass_histograms(img, patched, cfg, out_dir)
        except Exception as exc:  # noqa: BLE001 - per-file isolation is the contract
            log.warning("evaluate: skipping %s: %s", name, exc)
            errors.append((name, str(exc)))

    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(METRICS_HEADER)
    for row in rows:
        writer.writerow([_fmt(row[k]) for k in METRICS_HEADER])
    metrics_path = os.path.join(out_dir, "metrics.csv")
    _atomic_write(metrics_path, buf.getvalue())

    aggregates = {}
    for key in METRICS_HEADER[1:]:
        values = np.array([row[key] for row in rows], dtype=np.float64)
        with np.errstate(invalid="ignore"):
            aggregates[key] = float(np.nanmean(values)) if values.size else float("nan")
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(AGGREGATE_HEADER)
    for key, value in aggregates.items():
        writer.writerow([key, _fmt(value)])
    aggregate_path = os.path.join(out_dir, "aggregate.csv")
    _atomic_write(aggregate_path, buf.getvalue())

    manifest_path = os.path.join(out_dir, "manifest.json")
    _atomic_write(manifest_path, manifest.to_json())
    return EvalSummary(
        metrics_path=metrics_path,
        aggregate_path=aggregate_path,
        manifest_path=manifest_path,
        rows=rows,
        aggregates=aggregates,
        errors=errors,
    )


def _write_pass_histograms(
    clean: np.ndarray, patched: np.ndarray, cfg: DefenseConfig, out_dir: str
) -> None:
    from .analyzer import export_histogram, fit_distribution, mahalanobis_scores

    for tag, img in (("clean", clean), ("patched", patched)):
        grid = segment(img, cfg.kernel, cfg.stride)
        dist = fit_distribution(grid, cfg.shrinkage_lambda)
        scores = mahalanobis_scores(grid.vectors, dist)
        export_histogram(scores, os.path.join(out_dir, f"hist_{tag}.csv"), bins=32)


def nearest_neighbor_distances(grid: SegmentGrid, kind: str = "rms") -> np.ndarray:
    """Distance from each segment to its nearest other segment in the same image."""
    dist = pairwise_distances(grid.vectors, kind)
    np.fill_diagonal(dist, np.inf)
    return dist.min(axis=1)


def calibrate(
    clean_dir: str | os.PathLike,
    cfg: DefenseConfig,
) -> ClusterParams:
    """Choose eps and min_pts from a clean reference corpus.

    eps is the 95th percentile (inverted-CDF, so duplicating the corpus
    leaves it unchanged) of per-segment nearest-neighbor distances pooled
    over all images, floored at EPS_FLOOR when degenerate; min_pts is
    ceil(rho * n) with n the corpus's modal segment count.
    """
    paths = list_corpus(clean_dir)
    if not paths:
        raise ValueError(f"no PNG images found in {clean_dir}")
    pooled: list[np.ndarray] = []
    counts: list[int] = []
    for path in paths:
        grid = segment(load_image(path), cfg.kernel, cfg.stride)
        pooled.append(nearest_neighbor_distances(grid, cfg.distance_kind))
        counts.append(len(grid))
    all_nn = np.concatenate(pooled)
    eps = float(np.percentile(all_nn, CALIBRATION_PERCENTILE, method="inverted_cdf"))
    if eps <= 0.0:
        log.warning(
            "calibration corpus has degenerate nearest-neighbor distances; "
            "flooring eps at %g",
            EPS_FLOOR,
        )
        eps = EPS_FLOOR
    rho = cfg.min_pts_fraction if cfg.min_pts_fraction is not None else DEFAULT_RHO
    n = max(set(counts), key=counts.count)
    return ClusterParams(eps=eps, min_pts=max(1, math.ceil(rho * n)))
