import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image as PILImage

from patchblock.imagecore import (
    apply_mask_compose,
    load_image,
    load_mask,
    save_image,
    save_mask,
    validate_image,
    validate_mask,
)


def _write_png(path, array_u8, mode):
    PILImage.fromarray(array_u8, mode=mode).save(path)


def test_load_full_scale_gray_pixel(tmp_path):
    path = tmp_path / "one.png"
    _write_png(path, np.array([[255]], dtype=np.uint8), "L")
    img = load_image(path)
    assert img.shape == (1, 1, 1)
    assert img[0, 0, 0] == 1.0


def test_load_zero_gray_pixel(tmp_path):
    path = tmp_path / "zero.png"
    _write_png(path, np.array([[0]], dtype=np.uint8), "L")
    assert load_image(path)[0, 0, 0] == 0.0


def test_load_rgb_matches_reference_decoder(tmp_path):
    rng = np.random.default_rng(7)
    raw = rng.integers(0, 256, size=(2, 2, 3), dtype=np.uint8)
    path = tmp_path / "rgb.png"
    _write_png(path, raw, "RGB")
    img = load_image(path)
    # independent decode of the same file
    with PILImage.open(path) as im:
        ref = np.asarray(im, dtype=np.float64) / 255.0
    np.testing.assert_array_equal(img, ref)
    np.testing.assert_array_equal(img, raw / 255.0)


def test_load_16bit_gray(tmp_path):
    path = tmp_path / "deep.png"
    arr = np.array([[65535, 0], [32768, 1]], dtype=np.uint16)
    PILImage.fromarray(arr).save(path)
    img = load_image(path)
    assert img[0, 0, 0] == 1.0
    assert img[0, 1, 0] == 0.0
    assert img[1, 0, 0] == pytest.approx(32768 / 65535)


def test_lossy_format_rejected(tmp_path):
    with pytest.raises(ValueError, match="lossless"):
        load_image(tmp_path / "x.jpg")
    with pytest.raises(ValueError, match="lossless"):
        save_image(np.zeros((2, 2, 3)), tmp_path / "x.jpg")


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_image(tmp_path / "missing.png")


@pytest.mark.parametrize("value", [0.0, 1.0])
def test_constant_image_roundtrip(tmp_path, value):
    img = np.full((5, 7, 3), value)
    path = tmp_path / "const.png"
    save_image(img, path)
    np.testing.assert_array_equal(load_image(path), img)


@given(
    img=arrays(
        np.float64,
        st.tuples(st.integers(1, 8), st.integers(1, 8), st.sampled_from([1, 3])),
        elements=st.floats(0, 1),
    )
)
@settings(max_examples=50, deadline=None)
def test_roundtrip_error_within_quantization(img, tmp_path_factory):
    path = tmp_path_factory.mktemp("rt") / "img.png"
    save_image(img, path)
    back = load_image(path)
    assert back.shape == img.shape
    assert np.abs(back - img).max() <= 1 / 255


def test_validate_image_rejects_bad_shapes():
    with pytest.raises(ValueError):
        validate_image(np.zeros((4, 4)))
    with pytest.raises(ValueError):
        validate_image(np.zeros((4, 4, 2)))
    with pytest.raises(ValueError):
        validate_image(np.full((2, 2, 1), 1.5))
    with pytest.raises(ValueError):
        validate_image(np.full((2, 2, 1), -0.1))


def test_validate_mask_shape_and_values():
    validate_mask(np.ones((3, 3), dtype=np.uint8))
    with pytest.raises(ValueError):
        validate_mask(np.full((3, 3), 2, dtype=np.uint8))
    with pytest.raises(ValueError):
        validate_mask(np.ones((3, 3), dtype=np.uint8), shape=(4, 4))


def test_mask_roundtrip_png(tmp_path):
    rng = np.random.default_rng(3)
    mask = (rng.random((9, 11)) < 0.4).astype(np.uint8)
    path = tmp_path / "mask.png"
    save_mask(mask, path)
    np.testing.assert_array_equal(load_mask(path), mask)


def test_mask_from_text_matrix(tmp_path):
    path = tmp_path / "mask.txt"
    path.write_text("0 1 0\n1 1 0\n")
    np.testing.assert_array_equal(load_mask(path), [[0, 1, 0], [1, 1, 0]])
    bad = tmp_path / "bad.txt"
    bad.write_text("0 2\n")
    with pytest.raises(ValueError):
        load_mask(bad)


def test_compose_zero_mask_is_identity(rgb_image, rng):
    patch = rng.random(rgb_image.shape)
    zero = np.zeros(rgb_image.shape[:2], dtype=np.uint8)
    np.testing.assert_array_equal(apply_mask_compose(rgb_image, patch, zero), rgb_image)


def test_compose_full_mask_is_patch(rgb_image, rng):
    patch = rng.random(rgb_image.shape)
    ones = np.ones(rgb_image.shape[:2], dtype=np.uint8)
    np.testing.assert_array_equal(apply_mask_compose(rgb_image, patch, ones), patch)


def test_compose_block_matches_elementwise_oracle():
    rng = np.random.default_rng(11)
    x = rng.random((4, 4, 3))
    patch = np.full((4, 4, 3), 0.5)
    mask = np.zeros((4, 4), dtype=np.uint8)
    mask[0:2, 0:2] = 1
    out = apply_mask_compose(x, patch, mask)
    # brute-force the composition equation pixel by pixel
    expected = np.empty_like(x)
    for i in range(4):
        for j in range(4):
            for ch in range(3):
                m = mask[i, j]
                expected[i, j, ch] = (1 - m) * x[i, j, ch] + m * patch[i, j, ch]
    np.testing.assert_array_equal(out, expected)
    assert (out[0:2, 0:2] == 0.5).all()
    np.testing.assert_array_equal(out[2:], x[2:])


@given(
    x=arrays(np.float64, (5, 6, 3), elements=st.floats(0, 1)),
    patch=arrays(np.float64, (5, 6, 3), elements=st.floats(0, 1)),
    mask=arrays(np.uint8, (5, 6), elements=st.integers(0, 1)),
)
@settings(max_examples=60, deadline=None)
def test_compose_partition_property(x, patch, mask):
    """Every output pixel is either the input pixel or the patch pixel."""
    out = apply_mask_compose(x, patch, mask)
    chosen = np.where(mask[:, :, None].astype(bool), patch, x)
    np.testing.assert_array_equal(out, chosen)


def test_compose_dimension_mismatch():
    x = np.zeros((4, 4, 3))
    with pytest.raises(ValueError):
        apply_mask_compose(x, np.zeros((4, 5, 3)), np.zeros((4, 4), dtype=np.uint8))
    with pytest.raises(ValueError):
        apply_mask_compose(x, np.zeros((4, 4, 3)), np.zeros((5, 4), dtype=np.uint8))
