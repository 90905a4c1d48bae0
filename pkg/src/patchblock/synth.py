"""Seeded synthetic host images for experiments and corpus construction.

Hosts are periodic tile textures, optionally with i.i.d. uniform pixel
noise on top. With the tile period dividing the segmentation stride, every
full window sees identical content, which gives clean images a sharply
degenerate segment geometry; adding noise produces the spread needed for
covariance fitting. Tile value range and noise amplitude are chosen so no
clipping occurs and the advertised statistics are exact.
"""

from __future__ import annotations

import os

import numpy as np

from .imagecore import save_image


def make_host(
    height: int = 224,
    width: int = 224,
    channels: int = 3,
    tile: int = 8,
    low: float = 0.2,
    high: float = 0.8,
    noise: float = 0.0,
    noise_ramp: tuple[float, float] | None = None,
    seed: int | np.random.Generator = 0,
) -> np.ndarray:
    """Tile-textured host with optional uniform noise in [-noise, +noise].

    `noise_ramp=(a, b)` instead sweeps the amplitude from a at the left
    edge to b at the right edge (log-spaced when both are positive, so most
    columns stay near the quiet end), giving segments a continuum of grain
    levels. Requires the tile range plus the largest amplitude to stay
    inside [0, 1] so no clipping occurs.
    """
    amp = max(noise, *(noise_ramp or (0.0,)))
    if not 0.0 <= low - amp or not high + amp <= 1.0:
        raise ValueError("tile range plus noise amplitude must stay inside [0, 1]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pattern = rng.uniform(low, high, size=(tile, tile, channels))
    reps = (-(-height // tile), -(-width // tile), 1)
    img = np.tile(pattern, reps)[:height, :width]
    if noise_ramp is not None:
        a, b = noise_ramp
        space = np.geomspace if a > 0 and b > 0 else np.linspace
        amplitudes = space(a, b, width)[None, :, None]
        img = img + rng.uniform(-1.0, 1.0, size=img.shape) * amplitudes
    elif noise > 0.0:
        img = img + rng.uniform(-noise, noise, size=img.shape)
    return img


def write_corpus(
    out_dir: str | os.PathLike,
    count: int,
    seed: int = 0,
    **host_kwargs,
) -> list[str]:
    """Write `count` seeded hosts as PNGs into `out_dir`; returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for i in range(count):
        rng = np.random.default_rng(np.random.SeedSequence((seed, i)))
        img = make_host(seed=rng, **host_kwargs)
        path = os.path.join(os.fspath(out_dir), f"host_{i:03d}.png")
        save_image(img, path)
        paths.append(path)
    return paths
