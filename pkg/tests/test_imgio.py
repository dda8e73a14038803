import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image

from ctdecomp import imgio
from ctdecomp.errors import ImageFormatError


def write(path, data):
    path.write_bytes(data)
    return str(path)


def test_load_single_pixel(tmp_path):
    img = imgio.load_image(write(tmp_path / "a.ppm", b"P6\n1 1\n255\n" + bytes([255, 0, 128])))
    assert img.shape == (1, 1, 3)
    assert img.dtype == np.float64
    np.testing.assert_array_equal(img[0, 0], [1.0, 0.0, 128 / 255])


def test_load_zeros(tmp_path):
    img = imgio.load_image(write(tmp_path / "z.ppm", b"P6 2 2 255\n" + bytes(12)))
    np.testing.assert_array_equal(img, np.zeros((2, 2, 3)))


def test_load_header_with_comments(tmp_path):
    raw = b"P6\n# made by hand\n2 1\n# max\n255\n" + bytes([1, 2, 3, 4, 5, 6])
    img = imgio.load_image(write(tmp_path / "c.ppm", raw))
    np.testing.assert_array_equal(img.reshape(-1) * 255, [1, 2, 3, 4, 5, 6])


def test_truncated_payload_is_io_error(tmp_path):
    with pytest.raises(OSError):
        imgio.load_image(write(tmp_path / "t.ppm", b"P6\n2 2\n255\n" + bytes(5)))


def test_missing_file_is_io_error(tmp_path):
    with pytest.raises(OSError):
        imgio.load_image(str(tmp_path / "nope.ppm"))


def test_sixteen_bit_ppm_rejected_with_header(tmp_path):
    with pytest.raises(ImageFormatError, match="65535"):
        imgio.load_image(write(tmp_path / "w.ppm", b"P6\n1 1\n65535\n" + bytes(6)))


def test_ascii_ppm_rejected(tmp_path):
    with pytest.raises(ImageFormatError, match="P3"):
        imgio.load_image(write(tmp_path / "a.ppm", b"P3\n1 1\n255\n0 0 0\n"))


def test_save_rounds_half_up(tmp_path):
    path = str(tmp_path / "h.ppm")
    imgio.save_image(np.full((1, 1, 3), 0.5), path)
    assert open(path, "rb").read().endswith(bytes([128, 128, 128]))


def test_save_clamps(tmp_path):
    path = str(tmp_path / "c.ppm")
    imgio.save_image(np.array([[[1.7, -0.2, 0.0]]]), path)
    assert open(path, "rb").read() == b"P6\n1 1\n255\n" + bytes([255, 0, 0])


def test_save_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        imgio.save_image(np.zeros((1, 1, 3)), str(tmp_path / "missing" / "x.ppm"))


def test_save_leaves_no_temp_files(tmp_path):
    imgio.save_image(np.zeros((3, 2, 3)), str(tmp_path / "x.ppm"))
    assert os.listdir(tmp_path) == ["x.ppm"]


def test_png_round_trip_and_alpha_dropped(tmp_path, rng):
    codes = rng.integers(0, 256, size=(5, 7, 4), dtype=np.uint8)
    path = str(tmp_path / "a.png")
    Image.fromarray(codes, mode="RGBA").save(path)
    img = imgio.load_image(path)
    np.testing.assert_array_equal(img * 255, codes[..., :3])
    out = str(tmp_path / "b.png")
    imgio.save_image(img, out)
    np.testing.assert_array_equal(imgio.load_image(out), img)


def test_png_grayscale_rejected(tmp_path):
    path = str(tmp_path / "g.png")
    Image.fromarray(np.zeros((2, 2), dtype=np.uint8), mode="L").save(path)
    with pytest.raises(ImageFormatError, match="'L'"):
        imgio.load_image(path)


@settings(max_examples=40, deadline=None)
@given(arrays(np.uint8, st.tuples(st.integers(1, 9), st.integers(1, 9), st.just(3))))
def test_ppm_round_trip_byte_identical(codes):
    raw = b"P6\n%d %d\n255\n" % (codes.shape[1], codes.shape[0]) + codes.tobytes()
    img = imgio._parse_ppm(raw, "<mem>").astype(np.float64) / 255
    assert imgio.encode_ppm(img) == raw


def test_downsample_block_mean():
    img = np.array([[[0, 0, 0], [1, 1, 1]], [[1, 1, 1], [0, 0, 0]]], dtype=float)
    np.testing.assert_array_equal(imgio.downsample(img, 1), np.full((1, 1, 3), 0.5))


def test_downsample_zero_is_identity(astronaut64):
    out = imgio.downsample(astronaut64, 0)
    np.testing.assert_array_equal(out, astronaut64)
    assert out is not astronaut64


def test_downsample_thumbnail_size():
    assert imgio.downsample(np.zeros((768, 1024, 3)), 8).shape == (3, 4, 3)


def test_downsample_partial_blocks_fold_into_last():
    img = np.arange(5, dtype=float)[None, :, None].repeat(3, axis=2)
    out = imgio.downsample(img, 1)
    assert out.shape == (1, 2, 3)
    np.testing.assert_allclose(out[0, :, 0], [0.5, 3.0])


def test_downsample_oversized_factor_gives_one_pixel(rng):
    img = rng.random((5, 3, 3))
    out = imgio.downsample(img, 6)
    np.testing.assert_allclose(out[0, 0], img.mean(axis=(0, 1)))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(1, 40), st.integers(0, 6),
       st.floats(0, 1, allow_nan=False))
def test_downsample_constant_stays_constant(h, w, k, value):
    out = imgio.downsample(np.full((h, w, 3), value), k)
    assert out.shape == (max(1, h // 2 ** k), max(1, w // 2 ** k), 3)
    np.testing.assert_allclose(out, value, rtol=0, atol=1e-12)


def test_downsample_preserves_mean_on_exact_multiples(rng):
    img = rng.random((32, 48, 3))
    np.testing.assert_allclose(imgio.downsample(img, 3).mean(axis=(0, 1)), img.mean(axis=(0, 1)))


def test_auto_downsample_factor():
    assert imgio.auto_downsample_factor((256, 200, 3)) == 0
    assert imgio.auto_downsample_factor((257, 10, 3)) == 1
    assert imgio.auto_downsample_factor((768, 1024, 3)) == 2


def test_list_images_sorted(tmp_path):
    for name in ("b.ppm", "a.png", "notes.txt", "C.PPM"):
        (tmp_path / name).write_bytes(b"")
    (tmp_path / "dir.ppm").mkdir()
    assert imgio.list_images(str(tmp_path)) == ["C.PPM", "a.png", "b.ppm"]
