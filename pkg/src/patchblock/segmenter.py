"""Segmenting phase: overlapping square windows flattened to vectors.

A moving k-by-k window walks the image with a fixed stride; every window
that fits entirely inside the image becomes one flat vector. Trailing
pixels not reachable by a full window are left out (no padding), so the
224/40/8 geometry tiles exactly into 24x24 = 576 segments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imagecore import validate_image


@dataclass(frozen=True)
class Segment:
    """One window: its top-left origin and the flattened pixel vector."""

    origin_row: int
    origin_col: int
    vector: np.ndarray


@dataclass(frozen=True)
class SegmentGrid:
    """All windows of one image, row-major by origin.

    `vectors` is (n, kernel*kernel*channels); row i flattens the window at
    `origins[i]` in (row, col, channel) order. `source_dims` is (H, W, C).
    """

    vectors: np.ndarray
    origins: np.ndarray
    kernel: int
    stride: int
    source_dims: tuple[int, int, int]

    def __len__(self) -> int:
        return self.vectors.shape[0]

    def segment(self, i: int) -> Segment:
        r, c = self.origins[i]
        return Segment(int(r), int(c), self.vectors[i])

    def window(self, i: int) -> np.ndarray:
        """Window i as a (kernel, kernel, C) pixel block."""
        k = self.kernel
        return self.vectors[i].reshape(k, k, self.source_dims[2])


def segment_count(height: int, width: int, kernel: int, stride: int) -> int:
    """Closed-form number of full windows: (floor((H-k)/s)+1) * (floor((W-k)/s)+1)."""
    return ((height - kernel) // stride + 1) * ((width - kernel) // stride + 1)


def segment(img: np.ndarray, kernel: int, stride: int) -> SegmentGrid:
    """Chop `img` into all full k-by-k windows at origins (i*stride, j*stride)."""
    validate_image(img)
    h, w, c = img.shape
    if kernel < 1 or kernel > min(h, w):
        raise ValueError(f"kernel {kernel} must be in [1, min(H, W)={min(h, w)}]")
    if stride < 1:
        raise ValueError(f"stride must be positive, got {stride}")

    windows = np.lib.stride_tricks.sliding_window_view(img, (kernel, kernel), axis=(0, 1))
    windows = windows[::stride, ::stride]  # (nr, nc, C, k, k)
    nr, nc = windows.shape[:2]
    # flatten each window in (row, col, channel) order
    vectors = windows.transpose(0, 1, 3, 4, 2).reshape(nr * nc, kernel * kernel * c)

    rows = np.repeat(np.arange(nr) * stride, nc)
    cols = np.tile(np.arange(nc) * stride, nr)
    origins = np.stack([rows, cols], axis=1)
    return SegmentGrid(
        vectors=np.ascontiguousarray(vectors, dtype=np.float64),
        origins=origins,
        kernel=kernel,
        stride=stride,
        source_dims=(h, w, c),
    )


def footprint(seg: Segment, grid: SegmentGrid) -> np.ndarray:
    """Binary (H, W) mask with 1s exactly on the segment's k-by-k pixel block."""
    h, w, _ = grid.source_dims
    k = grid.kernel
    r, c = seg.origin_row, seg.origin_col
    if r < 0 or c < 0 or r + k > h or c + k > w:
        raise ValueError(f"segment origin ({r}, {c}) outside {h}x{w} image for kernel {k}")
    mask = np.zeros((h, w), dtype=np.uint8)
    mask[r : r + k, c : c + k] = 1
    return mask


def footprint_union(grid: SegmentGrid, indices: np.ndarray) -> np.ndarray:
    """Union of the footprints of the given segment indices, as one (H, W) mask."""
    h, w, _ = grid.source_dims
    k = grid.kernel
    mask = np.zeros((h, w), dtype=np.uint8)
    for i in np.asarray(indices, dtype=int):
        r, c = grid.origins[i]
        mask[r : r + k, c : c + k] = 1
    return mask
