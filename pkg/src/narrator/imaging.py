"""Pixel-level plumbing: the raster carrier, side-by-side concatenation,
and lossless PNG transport encoding.

All functions here are pure and deterministic; the PNG writer is a minimal
in-house encoder (single IDAT, filter 0) so that identical rasters always
produce identical bytes regardless of codec-library internals.
"""

from __future__ import annotations

import base64
import io
import struct
import zlib
from dataclasses import dataclass

from PIL import Image, UnidentifiedImageError

PNG_DIMENSION_LIMIT = 2**31 - 1

ACCEPTED_FORMATS = ("PNG", "JPEG")


class DecodeError(Exception):
    """The file is not a decodable PNG or JPEG raster."""


class EncodeError(Exception):
    """The raster cannot be represented as a PNG."""


@dataclass(frozen=True)
class Raster:
    """Row-major RGB image, 8 bits per channel."""

    width: int
    height: int
    pixels: bytes

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"raster dimensions must be positive, got {self.width}x{self.height}")
        expected = self.width * self.height * 3
        if len(self.pixels) != expected:
            raise ValueError(
                f"pixel buffer length {len(self.pixels)} != width*height*3 = {expected}"
            )

    def row(self, y: int) -> bytes:
        start = y * self.width * 3
        return self.pixels[start : start + self.width * 3]


@dataclass(frozen=True)
class ConcatLayout:
    """Geometry of a side-by-side concatenation."""

    left_width: int
    right_width: int
    height: int
    fill_rgb: tuple[int, int, int]

    @property
    def total_width(self) -> int:
        return self.left_width + self.right_width


def concat_side_by_side(
    before: Raster, after: Raster, fill_rgb: tuple[int, int, int] = (0, 0, 0)
) -> Raster:
    """Place `before` on the left and `after` on the right of one raster.

    Both sources are anchored at the top; rows below a shorter source are
    filled with `fill_rgb`. Total over all valid rasters.
    """
    height = max(before.height, after.height)
    left_fill = bytes(fill_rgb) * before.width
    right_fill = bytes(fill_rgb) * after.width
    rows = []
    for y in range(height):
        left = before.row(y) if y < before.height else left_fill
        right = after.row(y) if y < after.height else right_fill
        rows.append(left)
        rows.append(right)
    return Raster(before.width + after.width, height, b"".join(rows))


def layout_of(before: Raster, after: Raster, fill_rgb: tuple[int, int, int] = (0, 0, 0)) -> ConcatLayout:
    return ConcatLayout(before.width, after.width, max(before.height, after.height), fill_rgb)


def _png_chunk(tag: bytes, data: bytes) -> bytes:
    body = tag + data
    return struct.pack(">I", len(data)) + body + struct.pack(">I", zlib.crc32(body) & 0xFFFFFFFF)


def encode_png(raster: Raster) -> bytes:
    """Serialize a raster as a lossless, byte-deterministic RGB PNG."""
    if raster.width > PNG_DIMENSION_LIMIT or raster.height > PNG_DIMENSION_LIMIT:
        raise EncodeError(f"dimensions {raster.width}x{raster.height} exceed the PNG limit")
    stride = raster.width * 3
    filtered = b"".join(
        b"\x00" + raster.pixels[y * stride : (y + 1) * stride] for y in range(raster.height)
    )
    header = struct.pack(">IIBBBBB", raster.width, raster.height, 8, 2, 0, 0, 0)
    return (
        b"\x89PNG\r\n\x1a\n"
        + _png_chunk(b"IHDR", header)
        + _png_chunk(b"IDAT", zlib.compress(filtered, 9))
        + _png_chunk(b"IEND", b"")
    )


def encode_for_transport(raster: Raster) -> str:
    """PNG bytes, base64-encoded without line breaks."""
    return base64.b64encode(encode_png(raster)).decode("ascii")


def as_data_uri(payload: str) -> str:
    return f"data:image/png;base64,{payload}"


def decode_file(path) -> Raster:
    """Decode a PNG or JPEG file into an RGB raster.

    Grayscale and palette sources are normalized to RGB (grayscale is
    channel-replicated); anything that is not a PNG or JPEG is rejected.
    """
    try:
        with Image.open(path) as img:
            if img.format not in ACCEPTED_FORMATS:
                raise DecodeError(f"{path}: unsupported format {img.format!r}, expected PNG or JPEG")
            rgb = img.convert("RGB")
            return Raster(rgb.width, rgb.height, rgb.tobytes())
    except UnidentifiedImageError as exc:
        raise DecodeError(f"{path}: not a decodable image") from exc


def decode_bytes(data: bytes) -> Raster:
    """Decode in-memory PNG/JPEG bytes into an RGB raster."""
    try:
        with Image.open(io.BytesIO(data)) as img:
            if img.format not in ACCEPTED_FORMATS:
                raise DecodeError(f"unsupported format {img.format!r}, expected PNG or JPEG")
            rgb = img.convert("RGB")
            return Raster(rgb.width, rgb.height, rgb.tobytes())
    except UnidentifiedImageError as exc:
        raise DecodeError("not a decodable image") from exc
