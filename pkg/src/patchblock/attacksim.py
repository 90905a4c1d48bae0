"""Synthetic patch injection with exact ground-truth masks.

Stands in for trained adversarial patches: high-variance noise fields for
the main experiments, plus a constrained generator whose per-channel mean
and standard deviation are pinned to stated intervals relative to randomly
sampled clean fragments of the host (the stealthier variant an adaptive
attacker would use). Every draw is seeded, so identical specs reproduce
identical pixels and placements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagecore import apply_mask_compose, validate_image

PATCH_KINDS = ("uniform_noise", "high_frequency", "constant", "adaptive_constrained")

# post-clamp slack allowed on the mean-difference and std-ratio checks
ADAPTIVE_TOLERANCE = 0.005


class AdaptivePatchError(ValueError):
    """Constrained generation could not satisfy the bounds after clamping."""


@dataclass(frozen=True)
class PatchSpec:
    """What to inject: square side, placement (None = random), content kind, seed."""

    size: int = 50
    placement: tuple[int, int] | None = None
    kind: str = "uniform_noise"
    seed: int = 0
    constant_value: float = 0.5

    def __post_init__(self) -> None:
        if self.size < 1:
            raise ValueError(f"patch size must be >= 1, got {self.size}")
        if self.kind not in PATCH_KINDS:
            raise ValueError(f"unknown patch kind {self.kind!r}")
        if not 0.0 <= self.constant_value <= 1.0:
            raise ValueError("constant_value must be in [0, 1]")


@dataclass(frozen=True)
class AdaptiveBounds:
    """Constraint box for the adaptive patch, per channel.

    mean difference |patch_mean - fragments_mean| in [mean_diff_low, mean_diff_high];
    std ratio patch_std / fragments_std in [std_ratio_low, std_ratio_high].
    Fragment statistics average over `n_fragments` random clean windows of
    side `fragment_size`. With `field_period` set, the underlying noise
    field repeats with that spatial period, mimicking a tiled host texture
    instead of white noise (the stronger evasion: matched moments AND
    matched spatial structure).
    """

    mean_diff_low: float = 0.02
    mean_diff_high: float = 0.08
    std_ratio_low: float = 1.5
    std_ratio_high: float = 2.4
    n_fragments: int = 20
    fragment_size: int = 40
    field_period: int | None = None

    def __post_init__(self) -> None:
        if not 0 <= self.mean_diff_low <= self.mean_diff_high:
            raise ValueError("need 0 <= mean_diff_low <= mean_diff_high")
        if not 0 < self.std_ratio_low <= self.std_ratio_high:
            raise ValueError("need 0 < std_ratio_low <= std_ratio_high")
        if self.n_fragments < 1 or self.fragment_size < 1:
            raise ValueError("n_fragments and fragment_size must be >= 1")
        if self.field_period is not None and self.field_period < 1:
            raise ValueError("field_period must be >= 1 when set")


def _resolve_placement(
    spec: PatchSpec, host: np.ndarray, rng: np.random.Generator
) -> tuple[int, int]:
    h, w, _ = host.shape
    if spec.size > h or spec.size > w:
        raise ValueError(f"patch size {spec.size} exceeds {h}x{w} host")
    if spec.placement is None:
        row = int(rng.integers(0, h - spec.size + 1))
        col = int(rng.integers(0, w - spec.size + 1))
    else:
        row, col = spec.placement
        if row < 0 or col < 0 or row + spec.size > h or col + spec.size > w:
            raise ValueError(
                f"patch of size {spec.size} at ({row}, {col}) exceeds {h}x{w} host"
            )
    return row, col


def _compose_at(
    host: np.ndarray, content: np.ndarray, row: int, col: int
) -> tuple[np.ndarray, np.ndarray]:
    size = content.shape[0]
    canvas = np.zeros_like(host)
    canvas[row : row + size, col : col + size] = content
    mask = np.zeros(host.shape[:2], dtype=np.uint8)
    mask[row : row + size, col : col + size] = 1
    return apply_mask_compose(host, canvas, mask), mask


def make_patch(spec: PatchSpec, host: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inject a synthetic patch into `host`; returns (composed image, truth mask)."""
    validate_image(host)
    if spec.kind == "adaptive_constrained":
        return make_adaptive_patch(host, AdaptiveBounds(), spec)
    rng = np.random.default_rng(spec.seed)
    row, col = _resolve_placement(spec, host, rng)
    c = host.shape[2]
    if spec.kind == "uniform_noise":
        content = rng.random((spec.size, spec.size, c))
    elif spec.kind == "high_frequency":
        ii, jj = np.indices((spec.size, spec.size))
        checker = ((ii + jj) % 2).astype(np.float64)[:, :, None]
        content = 0.5 * rng.random((spec.size, spec.size, c)) + 0.5 * checker
    else:  # constant
        content = np.full((spec.size, spec.size, c), spec.constant_value)
    return _compose_at(host, content, row, col)


def _fragment_stats(
    host: np.ndarray, bounds: AdaptiveBounds, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Per-channel mean and std, each averaged over random clean fragments."""
    h, w, c = host.shape
    f = bounds.fragment_size
    if f > h or f > w:
        raise ValueError(f"fragment size {f} exceeds {h}x{w} host")
    means = np.empty((bounds.n_fragments, c))
    stds = np.empty((bounds.n_fragments, c))
    for i in range(bounds.n_fragments):
        r = int(rng.integers(0, h - f + 1))
        q = int(rng.integers(0, w - f + 1))
        frag = host[r : r + f, q : q + f]
        means[i] = frag.mean(axis=(0, 1))
        stds[i] = frag.std(axis=(0, 1))
    return means.mean(axis=0), stds.mean(axis=0)


def make_adaptive_patch(
    host: np.ndarray, bounds: AdaptiveBounds, spec: PatchSpec
) -> tuple[np.ndarray, np.ndarray]:
    """Inject a patch whose per-channel statistics track the host's clean fragments.

    A uniform noise field is standardized per channel and affinely rescaled
    to a target mean offset and std ratio inside the bound box, preferring
    the stealthiest feasible corner (small offset, low ratio). After
    clamping to [0, 1] the statistics are re-measured; candidates violating
    either interval by more than ADAPTIVE_TOLERANCE are discarded, and
    exhausting all candidates raises AdaptivePatchError.
    """
    validate_image(host)
    rng = np.random.default_rng(spec.seed)
    row, col = _resolve_placement(spec, host, rng)
    frag_mean, frag_std = _fragment_stats(host, bounds, rng)
    if np.any(frag_std == 0.0):
        raise AdaptivePatchError("host fragments have zero variance in some channel")

    c = host.shape[2]
    if bounds.field_period is None:
        field = rng.random((spec.size, spec.size, c))
    else:
        p = bounds.field_period
        cell = rng.random((p, p, c))
        reps = (-(-spec.size // p), -(-spec.size // p), 1)
        field = np.tile(cell, reps)[: spec.size, : spec.size]
    tol = ADAPTIVE_TOLERANCE
    # stealthiest corner first; widen toward the box center if clamping bites
    diff_targets = _ladder(bounds.mean_diff_low + 2 * tol, bounds.mean_diff_high - 2 * tol)
    ratio_targets = _ladder(bounds.std_ratio_low + 2 * tol, bounds.std_ratio_high - 2 * tol)

    content = np.empty_like(field)
    for ch in range(c):
        z = field[:, :, ch]
        if z.std() == 0.0:
            raise AdaptivePatchError(f"channel {ch}: degenerate noise field (zero spread)")
        z = (z - z.mean()) / z.std()
        content[:, :, ch] = _solve_channel(
            z, frag_mean[ch], frag_std[ch], diff_targets, ratio_targets, bounds, ch
        )
    return _compose_at(host, content, row, col)


def _ladder(lo: float, hi: float) -> list[float]:
    if hi < lo:
        return [lo]
    return list(np.linspace(lo, hi, 5))


def _solve_channel(
    z: np.ndarray,
    frag_mean: float,
    frag_std: float,
    diff_targets: list[float],
    ratio_targets: list[float],
    bounds: AdaptiveBounds,
    channel: int,
) -> np.ndarray:
    tol = ADAPTIVE_TOLERANCE
    signs = (1.0, -1.0) if frag_mean <= 0.5 else (-1.0, 1.0)
    for ratio in ratio_targets:
        for diff in diff_targets:
            for sign in signs:
                candidate = np.clip(frag_mean + sign * diff + ratio * frag_std * z, 0.0, 1.0)
                got_diff = abs(float(candidate.mean()) - frag_mean)
                got_ratio = float(candidate.std()) / frag_std
                if (
                    bounds.mean_diff_low - tol <= got_diff <= bounds.mean_diff_high + tol
                    and bounds.std_ratio_low - tol <= got_ratio <= bounds.std_ratio_high + tol
                ):
                    return candidate
    raise AdaptivePatchError(
        f"channel {channel}: no affine rescaling satisfies the bounds after clamping "
        f"(fragment mean {frag_mean:.4f}, std {frag_std:.4f})"
    )
