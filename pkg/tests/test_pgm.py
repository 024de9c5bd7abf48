"""Tests for PGM reading and writing."""

import numpy as np
import pytest

from errors import BadImageFormat
from storage.pgm import GrayImage, encode_pgm, parse_pgm, read_pgm, write_pgm


def test_plain_pgm_with_comments():
    data = b"P2\n# made by hand\n3 2\n# max\n255\n0 1 2\n3 4 255 # last row\n"
    image = parse_pgm(data)
    assert (image.width, image.height, image.maxval) == (3, 2, 255)
    np.testing.assert_array_equal(image.pixels, [[0, 1, 2], [3, 4, 255]])


def test_plain_round_trip_is_exact(tmp_path):
    pixels = np.array([[0, 7, 300], [65535, 12, 1]])
    path = write_pgm(tmp_path / "img.pgm", GrayImage(pixels, 65535), binary=False)
    assert path.read_bytes().startswith(b"P2\n3 2\n65535\n")
    np.testing.assert_array_equal(read_pgm(path).pixels, pixels)


def test_raw_sixteen_bit_is_big_endian():
    data = encode_pgm(GrayImage(np.array([[258, 1]]), 65535))
    assert data == b"P5\n2 1\n65535\n\x01\x02\x00\x01"
    np.testing.assert_array_equal(parse_pgm(data).pixels, [[258, 1]])


def test_raw_eight_bit_round_trip():
    pixels = np.arange(12).reshape(3, 4) * 20
    data = encode_pgm(GrayImage(pixels, 255))
    assert len(data) == len(b"P5\n4 3\n255\n") + 12
    np.testing.assert_array_equal(parse_pgm(data).pixels, pixels)


def test_write_creates_directories(tmp_path):
    path = write_pgm(tmp_path / "a" / "b" / "img.pgm", GrayImage(np.zeros((1, 1), int), 1))
    assert path.exists()


@pytest.mark.parametrize(
    "data",
    [
        b"P6\n1 1\n255\n\x00\x00\x00",
        b"P2\n1 1\n70000\n0\n",
        b"P2\n0 1\n255\n",
        b"P2\n2 1\n255\n1\n",
        b"P2\n1 1\n10\n11\n",
        b"P2\n1 1\n255\nx\n",
        b"P5\n2 2\n255\n\x00\x00",
        b"P5\n2 2",
        b"",
    ],
)
def test_malformed_files_rejected(data):
    with pytest.raises(BadImageFormat):
        parse_pgm(data)


def test_gray_image_validation():
    with pytest.raises(BadImageFormat):
        GrayImage(np.array([[5]]), 4)
    with pytest.raises(BadImageFormat):
        GrayImage(np.array([[0.5]]), 4)
    with pytest.raises(BadImageFormat):
        GrayImage(np.array([1, 2]), 4)
