import csv

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from patchblock.analyzer import (
    SegmentDistribution,
    export_histogram,
    fit_distribution,
    mahalanobis,
    mahalanobis_scores,
    modality_report,
)
from patchblock.segmenter import segment


def test_fit_mean_is_sample_mean():
    m = np.array([0.4, 0.6, 0.5])
    v = np.array([0.1, -0.2, 0.05])
    dist = fit_distribution(np.vstack([m + v, m - v]), shrinkage_lambda=0.5)
    np.testing.assert_allclose(dist.mean, m)


def test_full_shrinkage_gives_scaled_identity():
    rng = np.random.default_rng(0)
    X = rng.random((20, 4))
    dist = fit_distribution(X, shrinkage_lambda=1.0)
    sample_cov = np.cov(X, rowvar=False)
    scale = np.trace(sample_cov) / 4
    np.testing.assert_allclose(dist.covariance, scale * np.eye(4), atol=1e-12)


def test_fit_recovers_known_gaussian_mean():
    rng = np.random.default_rng(123)
    true_mean = np.array([1.0, -2.0, 0.5])
    sigma = 0.3
    X = true_mean + sigma * rng.standard_normal((100, 3))
    dist = fit_distribution(X, shrinkage_lambda=0.01)
    assert np.abs(dist.mean - true_mean).max() < 3 * sigma / np.sqrt(100)


def test_fit_requires_two_samples():
    with pytest.raises(ValueError):
        fit_distribution(np.ones((1, 3)), shrinkage_lambda=0.1)


def test_zero_variance_data_fails_without_shrinkage():
    X = np.tile([0.5, 0.5], (10, 1))
    with pytest.raises(ValueError):
        fit_distribution(X, shrinkage_lambda=0.0)
    # with shrinkage the identity floor keeps the matrix invertible
    dist = fit_distribution(X, shrinkage_lambda=0.1)
    assert mahalanobis(np.array([0.5, 0.5]), dist) == 0.0


def test_mahalanobis_zero_at_mean():
    rng = np.random.default_rng(2)
    dist = fit_distribution(rng.random((30, 5)), shrinkage_lambda=0.2)
    assert mahalanobis(dist.mean, dist) == 0.0


def test_mahalanobis_identity_covariance_1d():
    dist = SegmentDistribution(
        mean=np.array([0.0]), covariance=np.array([[1.0]]),
        shrinkage_lambda=0.0, sample_count=2,
    )
    assert mahalanobis(np.array([0.5]), dist) == pytest.approx(0.5, abs=1e-12)


def test_mahalanobis_diag_hand_case():
    dist = SegmentDistribution(
        mean=np.zeros(2), covariance=np.diag([4.0, 1.0]),
        shrinkage_lambda=0.0, sample_count=3,
    )
    assert mahalanobis(np.array([2.0, 3.0]), dist) == pytest.approx(np.sqrt(10.0), abs=1e-9)


def test_mahalanobis_rejects_singular_covariance():
    with pytest.raises(ValueError):
        SegmentDistribution(
            mean=np.zeros(2), covariance=np.zeros((2, 2)),
            shrinkage_lambda=0.0, sample_count=2,
        )


def test_mahalanobis_length_mismatch():
    dist = SegmentDistribution(
        mean=np.zeros(2), covariance=np.eye(2), shrinkage_lambda=0.0, sample_count=2
    )
    with pytest.raises(ValueError):
        mahalanobis(np.zeros(3), dist)


def test_scores_match_scalar_path():
    rng = np.random.default_rng(7)
    X = rng.random((25, 6))
    dist = fit_distribution(X, shrinkage_lambda=0.3)
    batch = mahalanobis_scores(X, dist)
    single = np.array([mahalanobis(x, dist) for x in X])
    np.testing.assert_allclose(batch, single, rtol=1e-10, atol=1e-12)


def test_affine_invariance_at_lambda_zero():
    rng = np.random.default_rng(11)
    X = rng.random((60, 5))
    A = rng.standard_normal((5, 5)) + 3 * np.eye(5)
    b = rng.standard_normal(5)
    Y = X @ A.T + b
    x = rng.random(5)
    dist_x = fit_distribution(X, shrinkage_lambda=0.0)
    dist_y = fit_distribution(Y, shrinkage_lambda=0.0)
    dx = mahalanobis(x, dist_x)
    dy = mahalanobis(A @ x + b, dist_y)
    assert dx == pytest.approx(dy, rel=1e-6)


@given(seed=st.integers(0, 5000))
@settings(max_examples=30, deadline=None)
def test_triangle_like_bound(seed):
    """d_M(x) <= d_M(y) + whitened distance between x and y (norm property)."""
    rng = np.random.default_rng(seed)
    X = rng.random((30, 4))
    dist = fit_distribution(X, shrinkage_lambda=0.2)
    x, y = rng.random(4), rng.random(4)
    shifted = SegmentDistribution(
        mean=y, covariance=dist.covariance,
        shrinkage_lambda=dist.shrinkage_lambda, sample_count=dist.sample_count,
    )
    cross = mahalanobis(x, shifted)  # sqrt((x-y)^T S^-1 (x-y))
    assert mahalanobis(x, dist) <= mahalanobis(y, dist) + cross + 1e-9


def test_pca_path_reduces_dimension_and_scores():
    rng = np.random.default_rng(13)
    # two dominant directions plus faint isotropic noise
    Z = rng.standard_normal((80, 2)) @ rng.standard_normal((2, 10)) * 2.0
    X = Z + 0.01 * rng.standard_normal((80, 10))
    dist = fit_distribution(X, shrinkage_lambda=0.1, pca_variance=0.95)
    assert dist.basis is not None
    assert dist.basis.shape[0] < 10
    assert dist.covariance.shape == (dist.basis.shape[0],) * 2
    assert mahalanobis(dist.mean, dist) == 0.0
    scores = mahalanobis_scores(X, dist)
    assert scores.shape == (80,) and (scores >= 0).all()


def test_modality_all_equal_is_unimodal():
    report = modality_report(np.full(10, 3.0))
    assert report.modality == "unimodal"
    assert report.separation_score == 0.0


def test_modality_two_tight_groups_is_bimodal():
    rng = np.random.default_rng(4)
    low = rng.normal(1.0, 0.05, 500)
    high = rng.normal(5.0, 0.05, 60)
    report = modality_report(np.concatenate([low, high]))
    assert report.modality == "bimodal"
    assert report.separation_score > 2.0
    # threshold sits between the group means
    assert 1.0 < report.threshold < 5.0
    # split groups recovered: count below threshold matches construction
    assert (report.distances < report.threshold).sum() == 500


def test_modality_single_gaussian_is_unimodal():
    rng = np.random.default_rng(17)
    report = modality_report(rng.normal(2.0, 0.3, 500))
    assert report.modality == "unimodal"


def test_modality_separation_matches_hand_formula():
    vals = np.array([1.0, 1.0, 1.0, 9.0, 9.0, 9.0])
    report = modality_report(vals)
    # groups are exactly {1,1,1} and {9,9,9}: means 1 and 9, stds 0
    assert report.separation_score == pytest.approx(8.0 / 1e-12, rel=1e-6)
    assert report.threshold == pytest.approx(5.0)


def test_modality_requires_four_values():
    with pytest.raises(ValueError):
        modality_report(np.array([1.0, 2.0, 3.0]))


def _read_hist(path):
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["bin_left", "bin_right", "count"]
    return [(float(a), float(b), int(c)) for a, b, c in rows[1:]]


def test_histogram_two_bins(tmp_path):
    path = tmp_path / "h.csv"
    export_histogram(np.array([0.0, 0.0, 1.0, 1.0]), path, bins=2)
    rows = _read_hist(path)
    assert [r[2] for r in rows] == [2, 2]
    assert rows[0][0] == 0.0 and rows[-1][1] == 1.0


def test_histogram_degenerate_single_bin(tmp_path):
    path = tmp_path / "h.csv"
    export_histogram(np.full(7, 2.5), path, bins=5)
    rows = _read_hist(path)
    assert rows == [(2.5, 2.5, 7)]


def test_histogram_uniform_counts(tmp_path):
    rng = np.random.default_rng(21)
    path = tmp_path / "h.csv"
    export_histogram(rng.random(1000), path, bins=10)
    rows = _read_hist(path)
    assert sum(r[2] for r in rows) == 1000
    assert all(abs(r[2] - 100) <= 50 for r in rows)


def test_histogram_rejects_bad_bins(tmp_path):
    with pytest.raises(ValueError):
        export_histogram(np.array([1.0, 2.0]), tmp_path / "h.csv", bins=1)


def test_patched_segments_score_higher_than_clean(rng):
    """Directional check: a high-variance noise block inflates segment scores."""
    from patchblock.attacksim import PatchSpec, make_patch
    from patchblock.synth import make_host

    host = make_host(128, 128, tile=8, noise=0.05, seed=31)
    patched, truth = make_patch(PatchSpec(size=40, placement=(24, 24), seed=5), host)
    grid = segment(patched, 32, 16)
    dist = fit_distribution(grid, shrinkage_lambda=0.1)
    scores = mahalanobis_scores(grid.vectors, dist)
    overlap = np.array(
        [truth[r : r + 32, c : c + 32].sum() / (32 * 32) for r, c in grid.origins]
    )
    on_patch = scores[overlap >= 0.25]
    off_patch = scores[overlap == 0]
    assert on_patch.mean() > off_patch.mean()
