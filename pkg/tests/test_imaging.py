from __future__ import annotations

import base64
import io
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from narrator.imaging import (
    DecodeError,
    Raster,
    concat_side_by_side,
    decode_bytes,
    decode_file,
    encode_for_transport,
    encode_png,
)

from png_oracle import read_png_rgb


def make_raster(width: int, height: int, seed: int) -> Raster:
    rng = random.Random(seed)
    return Raster(width, height, bytes(rng.randrange(256) for _ in range(width * height * 3)))


rasters = st.builds(
    make_raster,
    width=st.integers(min_value=1, max_value=12),
    height=st.integers(min_value=1, max_value=12),
    seed=st.integers(min_value=0, max_value=2**32 - 1),
)


def test_raster_rejects_bad_buffer_length():
    with pytest.raises(ValueError):
        Raster(2, 2, b"\x00" * 11)


def test_raster_rejects_zero_dimensions():
    with pytest.raises(ValueError):
        Raster(0, 1, b"")


def test_concat_two_square_rasters():
    a = make_raster(2, 2, seed=1)
    b = make_raster(2, 2, seed=2)
    out = concat_side_by_side(a, b)
    assert (out.width, out.height) == (4, 2)
    for y in range(2):
        assert out.row(y)[:6] == a.row(y)
        assert out.row(y)[6:] == b.row(y)


def test_concat_unequal_heights_fills_black():
    # 2x3 left, 2x1 right; expected 36-byte buffer written out by hand.
    before = Raster(2, 3, bytes(range(1, 19)))
    after = Raster(2, 1, bytes(range(101, 107)))
    out = concat_side_by_side(before, after, fill_rgb=(0, 0, 0))
    expected = bytes(
        [
            1, 2, 3, 4, 5, 6, 101, 102, 103, 104, 105, 106,
            7, 8, 9, 10, 11, 12, 0, 0, 0, 0, 0, 0,
            13, 14, 15, 16, 17, 18, 0, 0, 0, 0, 0, 0,
        ]
    )
    assert (out.width, out.height) == (4, 3)
    assert out.pixels == expected


def test_concat_self_halves_equal():
    a = make_raster(3, 4, seed=3)
    out = concat_side_by_side(a, a)
    for y in range(out.height):
        row = out.row(y)
        assert row[: len(row) // 2] == row[len(row) // 2 :]


def test_concat_is_order_sensitive():
    a = make_raster(2, 2, seed=10)
    b = make_raster(2, 2, seed=11)
    assert a.pixels != b.pixels
    assert concat_side_by_side(a, b).pixels != concat_side_by_side(b, a).pixels


@settings(max_examples=100, deadline=None)
@given(before=rasters, after=rasters, fill=st.tuples(*[st.integers(0, 255)] * 3))
def test_concat_regions_property(before: Raster, after: Raster, fill):
    out = concat_side_by_side(before, after, fill_rgb=fill)
    assert out.width == before.width + after.width
    assert out.height == max(before.height, after.height)
    fill_bytes = bytes(fill)
    for y in range(out.height):
        row = out.row(y)
        left, right = row[: before.width * 3], row[before.width * 3 :]
        assert left == (before.row(y) if y < before.height else fill_bytes * before.width)
        assert right == (after.row(y) if y < after.height else fill_bytes * after.width)


def test_encode_transport_red_pixel_round_trip():
    red = Raster(1, 1, bytes((255, 0, 0)))
    payload = encode_for_transport(red)
    assert "\n" not in payload
    width, height, rgb = read_png_rgb(base64.b64decode(payload))
    assert (width, height, rgb) == (1, 1, bytes((255, 0, 0)))


def test_encode_transport_is_deterministic():
    a = make_raster(5, 4, seed=7)
    b = Raster(a.width, a.height, a.pixels)
    assert encode_for_transport(a) == encode_for_transport(b)


@settings(max_examples=100, deadline=None)
@given(raster=rasters)
def test_png_round_trip_against_independent_readers(raster: Raster):
    data = encode_png(raster)
    # Oracle 1: the hand-written reader in this test suite.
    assert read_png_rgb(data) == (raster.width, raster.height, raster.pixels)
    # Oracle 2: Pillow.
    with Image.open(io.BytesIO(data)) as img:
        assert img.mode == "RGB"
        assert (img.width, img.height) == (raster.width, raster.height)
        assert img.tobytes() == raster.pixels


def test_decode_file_normalizes_grayscale(tmp_path):
    gray = Image.new("L", (3, 2))
    gray.putdata([0, 60, 120, 180, 240, 255])
    path = tmp_path / "gray.png"
    gray.save(path)
    raster = decode_file(path)
    assert raster.width == 3 and raster.height == 2
    for x, value in enumerate([0, 60, 120, 180, 240, 255]):
        offset = x * 3
        assert raster.pixels[offset : offset + 3] == bytes((value, value, value))


def test_decode_rejects_non_image(tmp_path):
    path = tmp_path / "noise.png"
    path.write_bytes(b"definitely not an image")
    with pytest.raises(DecodeError):
        decode_file(path)


def test_decode_rejects_unsupported_format():
    buf = io.BytesIO()
    Image.new("RGB", (2, 2)).save(buf, format="BMP")
    with pytest.raises(DecodeError):
        decode_bytes(buf.getvalue())


def test_decode_accepts_jpeg(tmp_path):
    img = Image.new("RGB", (4, 4), color=(10, 20, 30))
    path = tmp_path / "img.jpg"
    img.save(path, format="JPEG")
    raster = decode_file(path)
    assert (raster.width, raster.height) == (4, 4)
