import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from htm_recog.errors import ParseError
from htm_recog.imaging import (
    GrayImage,
    RgbImage,
    average,
    center_crop,
    load_gray,
    parse_pnm,
    read_pnm,
    stddev_filter,
    to_grayscale,
    write_pgm,
    write_ppm,
)

from oracles import std_filter_reference


def rgb(*triple):
    return RgbImage(np.array([[triple]], dtype=np.uint8))


class TestGrayscale:
    def test_white(self):
        assert to_grayscale(rgb(255, 255, 255)).pixels.tolist() == [[1.0]]

    def test_black(self):
        assert to_grayscale(rgb(0, 0, 0)).pixels.tolist() == [[0.0]]

    def test_pure_red_is_red_weight(self):
        assert to_grayscale(rgb(255, 0, 0)).pixels[0, 0] == pytest.approx(0.299, abs=1e-12)

    def test_weights_per_channel(self):
        px = np.array([[[0, 255, 0], [0, 0, 255], [10, 20, 30]]], dtype=np.uint8)
        out = to_grayscale(RgbImage(px)).pixels[0]
        assert out[0] == pytest.approx(0.587)
        assert out[1] == pytest.approx(0.114)
        assert out[2] == pytest.approx((0.299 * 10 + 0.587 * 20 + 0.114 * 30) / 255)

    def test_dimensions_preserved(self):
        px = np.zeros((3, 5, 3), dtype=np.uint8)
        g = to_grayscale(RgbImage(px))
        assert (g.width, g.height) == (5, 3)

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            RgbImage(np.zeros((2, 2), dtype=np.uint8))


class TestStddevFilter:
    def test_constant_image_is_zero(self):
        for value in (0.0, 0.1, 0.7, 1.0):
            out = stddev_filter(GrayImage(np.full((5, 4), value)))
            assert not out.pixels.any()

    def test_centre_spike(self):
        px = np.zeros((3, 3))
        px[1, 1] = 1.0
        out = stddev_filter(GrayImage(px), 1)
        expected = std_filter_reference(px.tolist(), 1)[1][1]
        assert expected == pytest.approx(math.sqrt(8 / 81) / 0.5)
        assert out.pixels[1, 1] == pytest.approx(expected, abs=1e-12)
        assert out.pixels[1, 1] == pytest.approx(0.6285, abs=1e-4)

    def test_single_pixel(self):
        assert stddev_filter(GrayImage([[0.4]]), 1).pixels.tolist() == [[0.0]]

    def test_radius_must_be_positive(self):
        with pytest.raises(ValueError):
            stddev_filter(GrayImage([[0.4]]), 0)

    @pytest.mark.parametrize("radius", [1, 2, 3])
    def test_matches_loop_reference(self, radius):
        rng = np.random.default_rng(radius)
        px = rng.random((7, 9))
        got = stddev_filter(GrayImage(px), radius).pixels
        want = np.array(std_filter_reference(px.tolist(), radius))
        np.testing.assert_allclose(got, want, atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(arrays(np.float64, st.tuples(st.integers(1, 8), st.integers(1, 8)),
                  elements=st.floats(0, 1)), st.integers(1, 3))
    def test_output_in_unit_interval_and_shape_kept(self, px, radius):
        out = stddev_filter(GrayImage(px), radius)
        assert out.pixels.shape == px.shape
        assert out.pixels.min() >= 0.0 and out.pixels.max() <= 1.0

    @settings(max_examples=60, deadline=None)
    # 8-bit levels; a std of subnormal-scale values underflows to 0.
    @given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)),
                  elements=st.integers(0, 255).map(lambda v: v / 255)))
    def test_zero_exactly_where_neighbourhood_constant(self, px):
        out = stddev_filter(GrayImage(px), 1).pixels
        padded = np.pad(px, 1, mode="edge")
        for y in range(px.shape[0]):
            for x in range(px.shape[1]):
                window = padded[y : y + 3, x : x + 3]
                assert (out[y, x] == 0.0) == (window.max() == window.min())

    def test_deterministic(self):
        px = np.random.default_rng(0).random((6, 6))
        a = stddev_filter(GrayImage(px)).pixels
        b = stddev_filter(GrayImage(px)).pixels
        assert np.array_equal(a, b)


def test_gray_rejects_out_of_range():
    with pytest.raises(ValueError):
        GrayImage([[1.5]])


def test_average():
    a = GrayImage([[0.0, 1.0]])
    b = GrayImage([[1.0, 1.0]])
    assert average([a, b]).pixels.tolist() == [[0.5, 1.0]]


def test_center_crop():
    img = GrayImage(np.arange(35, dtype=float).reshape(5, 7) / 34)
    out = center_crop(img, 4)
    assert out.pixels.shape == (4, 4)
    np.testing.assert_array_equal(out.pixels, img.pixels[0:4, 1:5])


class TestPnm:
    def test_pgm_roundtrip(self, tmp_path):
        data = np.arange(12, dtype=np.uint8).reshape(3, 4) * 20
        img = GrayImage.from_uint8(data)
        write_pgm(tmp_path / "a.pgm", img)
        back = read_pnm(tmp_path / "a.pgm")
        assert isinstance(back, GrayImage)
        np.testing.assert_array_equal(back.to_uint8(), data)

    def test_ppm_roundtrip_and_load_gray(self, tmp_path):
        px = np.random.default_rng(1).integers(0, 256, (4, 3, 3), dtype=np.uint8)
        write_ppm(tmp_path / "a.ppm", RgbImage(px))
        back = read_pnm(tmp_path / "a.ppm")
        assert isinstance(back, RgbImage)
        np.testing.assert_array_equal(back.pixels, px)
        gray = load_gray(tmp_path / "a.ppm")
        np.testing.assert_allclose(gray.pixels, to_grayscale(RgbImage(px)).pixels)

    def test_header_comments(self):
        img = parse_pnm(b"P5\n# made by hand\n2 1\n# max\n255\n\x00\xff")
        assert img.pixels.tolist() == [[0.0, 1.0]]

    @pytest.mark.parametrize("payload, msg", [
        (b"P2\n1 1\n255\n0", "magic"),
        (b"P5\n1 1\n65535\n\x00\x00", "maxval"),
        (b"P5\n2 2\n255\n\x00", "raster"),
        (b"P5\n2", "header"),
    ])
    def test_errors_name_file(self, tmp_path, payload, msg):
        path = tmp_path / "bad.pgm"
        path.write_bytes(payload)
        with pytest.raises(ParseError) as exc:
            read_pnm(path)
        assert "bad.pgm" in str(exc.value)
        assert msg in str(exc.value)
