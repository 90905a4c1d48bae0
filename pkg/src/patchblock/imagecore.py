"""Image values, masks, and lossless file I/O.

Images are float64 arrays of shape (H, W, C) with C in {1, 3} and
intensities in [0, 1]. Masks are uint8 arrays of shape (H, W) with
entries in {0, 1}. Only PNG is accepted on disk: lossy codecs destroy
the fine-grained noise this pipeline is built to detect.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image as PILImage

_SUPPORTED_EXT = {".png"}


def validate_image(img: np.ndarray) -> None:
    """Raise ValueError unless `img` is a valid (H, W, C) intensity array."""
    if not isinstance(img, np.ndarray) or img.ndim != 3:
        raise ValueError("image must be an (H, W, C) array")
    h, w, c = img.shape
    if h < 1 or w < 1:
        raise ValueError(f"image dimensions must be positive, got {h}x{w}")
    if c not in (1, 3):
        raise ValueError(f"image must have 1 or 3 channels, got {c}")
    if not np.issubdtype(img.dtype, np.floating):
        raise ValueError(f"image dtype must be floating, got {img.dtype}")
    if img.size and (img.min() < 0.0 or img.max() > 1.0):
        raise ValueError("image intensities must lie in [0, 1]")


def validate_mask(mask: np.ndarray, shape: tuple[int, int] | None = None) -> None:
    """Raise ValueError unless `mask` is a binary (H, W) array, optionally of `shape`."""
    if not isinstance(mask, np.ndarray) or mask.ndim != 2:
        raise ValueError("mask must be an (H, W) array")
    if shape is not None and mask.shape != tuple(shape):
        raise ValueError(f"mask shape {mask.shape} does not match image {tuple(shape)}")
    vals = np.unique(mask)
    if not np.isin(vals, (0, 1)).all():
        raise ValueError("mask entries must be 0 or 1")


def _check_ext(path: str | os.PathLike) -> None:
    ext = os.path.splitext(os.fspath(path))[1].lower()
    if ext not in _SUPPORTED_EXT:
        raise ValueError(
            f"unsupported format {ext!r}: only lossless PNG is accepted"
        )


def load_image(path: str | os.PathLike) -> np.ndarray:
    """Load a PNG into an (H, W, C) float64 array scaled into [0, 1].

    8-bit channels are scaled by 1/255, 16-bit grayscale by 1/65535.
    Grayscale files come back with C=1, RGB with C=3.
    """
    _check_ext(path)
    with PILImage.open(path) as im:
        if im.width < 1 or im.height < 1:
            raise ValueError(f"zero-dimension image: {path}")
        if im.mode == "L":
            arr = np.asarray(im, dtype=np.float64)[:, :, None] / 255.0
        elif im.mode == "RGB":
            arr = np.asarray(im, dtype=np.float64) / 255.0
        elif im.mode in ("I;16", "I"):
            arr = np.asarray(im, dtype=np.float64)[:, :, None] / 65535.0
        else:
            raise ValueError(
                f"unsupported PNG mode {im.mode!r} (expected L, RGB, or 16-bit gray)"
            )
    validate_image(arr)
    return arr


def save_image(img: np.ndarray, path: str | os.PathLike) -> None:
    """Write an image as 8-bit PNG; round-tripping changes values by at most 1/255."""
    validate_image(img)
    _check_ext(path)
    quant = np.rint(img * 255.0).astype(np.uint8)
    if img.shape[2] == 1:
        PILImage.fromarray(quant[:, :, 0], mode="L").save(path)
    else:
        PILImage.fromarray(quant, mode="RGB").save(path)


def load_mask(path: str | os.PathLike) -> np.ndarray:
    """Load a mask from a single-channel PNG ({0,255}) or a plain-text 0/1 matrix."""
    ext = os.path.splitext(os.fspath(path))[1].lower()
    if ext == ".txt":
        mat = np.loadtxt(path, ndmin=2)
        if not np.isin(mat, (0, 1)).all():
            raise ValueError("text mask entries must be integers 0 or 1")
        mask = mat.astype(np.uint8)
    elif ext == ".png":
        with PILImage.open(path) as im:
            if im.mode != "L":
                raise ValueError(f"mask PNG must be single-channel, got mode {im.mode!r}")
            mask = (np.asarray(im) >= 128).astype(np.uint8)
    else:
        raise ValueError(f"unsupported mask format {ext!r} (expected .png or .txt)")
    validate_mask(mask)
    return mask


def save_mask(mask: np.ndarray, path: str | os.PathLike) -> None:
    """Write a mask as a single-channel PNG with values {0, 255}."""
    validate_mask(mask)
    _check_ext(path)
    PILImage.fromarray((mask * 255).astype(np.uint8), mode="L").save(path)


def apply_mask_compose(x: np.ndarray, patch: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Composite `patch` over `x` wherever `mask` is 1.

    Output pixel = patch pixel where mask=1, original pixel elsewhere.
    """
    validate_image(x)
    validate_image(patch)
    if x.shape != patch.shape:
        raise ValueError(f"image/patch shape mismatch: {x.shape} vs {patch.shape}")
    validate_mask(mask, shape=x.shape[:2])
    m = mask[:, :, None].astype(np.float64)
    return (1.0 - m) * x + m * patch
