"""Deterministic raster operations and the 16-bit netpbm interchange format.

Images are 16-bit single-channel rasters.  Orientation fixes, square
padding, nearest-neighbour downsampling, and rectangle redaction are all
pure functions with pinned index conventions so results are bit-identical
everywhere.  Interchange is 16-bit binary PGM (P5, big-endian samples);
8-bit PPM (P6) is provided for colour overlays.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class NotSquare(ValueError):
    """Raised when an operation requires a square input image."""


class RegionOutOfBounds(ValueError):
    """Raised when a redaction region is not fully inside the image."""


class BadHeader(ValueError):
    """Raised on a malformed or unsupported netpbm header."""


class TruncatedPixels(ValueError):
    """Raised when a netpbm payload is shorter than the header promises."""


class Image16(object):
    """16-bit single-channel raster; pixels are a row-major (h, w) array."""

    __slots__ = ("pixels",)

    def __init__(self, pixels: np.ndarray):
        arr = np.ascontiguousarray(pixels, dtype=np.uint16)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"expected a 2-d raster, got shape {arr.shape}")
        self.pixels = arr

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def copy(self) -> "Image16":
        return Image16(self.pixels.copy())

    def __eq__(self, other) -> bool:
        if not isinstance(other, Image16):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )

    def __repr__(self) -> str:
        return f"Image16({self.width}x{self.height})"


@dataclass(frozen=True)
class RectRegion:
    """Axis-aligned pixel rectangle: top-left inclusive, size in pixels."""

    x0: int
    y0: int
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("region must have positive size")
        if self.x0 < 0 or self.y0 < 0:
            raise ValueError("region origin must be non-negative")


def orient(img: Image16, quarter_turns: int, mirror_horizontal: bool = False) -> Image16:
    """Mirror (left-right) first, then rotate counterclockwise by 90-degree steps."""
    px = img.pixels
    if mirror_horizontal:
        px = np.fliplr(px)
    turns = quarter_turns % 4
    if turns:
        px = np.rot90(px, k=turns)
    return Image16(px)


def center_on_square(img: Image16) -> Image16:
    """Center the image on a square black canvas fit to its long axis.

    Padding along the short axis is split floor(d/2) before, ceil(d/2) after.
    """
    h, w = img.pixels.shape
    side = max(h, w)
    if h == w:
        return img
    canvas = np.zeros((side, side), dtype=np.uint16)
    top = (side - h) // 2
    left = (side - w) // 2
    canvas[top:top + h, left:left + w] = img.pixels
    return Image16(canvas)


def downsample_nn(img: Image16, target_side: int) -> Image16:
    """Nearest-neighbour downsample of a square image.

    out[y][x] = in[floor(y*S/T)][floor(x*S/T)] for source side S, target T.
    """
    h, w = img.pixels.shape
    if h != w:
        raise NotSquare(f"expected square image, got {w}x{h}")
    if target_side < 1:
        raise ValueError("target_side must be >= 1")
    src = np.arange(target_side, dtype=np.int64) * h // target_side
    return Image16(img.pixels[np.ix_(src, src)])


def display_normalize(img: Image16) -> tuple[int, int]:
    """Display look-up parameters (black point, white point); pixels untouched."""
    return 0, int(img.pixels.max())


def redact(img: Image16, region: RectRegion) -> Image16:
    """Zero the pixels inside the region; everything else is unchanged."""
    h, w = img.pixels.shape
    if region.x0 + region.width > w or region.y0 + region.height > h:
        raise RegionOutOfBounds(
            f"region {region} exceeds {w}x{h} image"
        )
    out = img.pixels.copy()
    out[region.y0:region.y0 + region.height, region.x0:region.x0 + region.width] = 0
    return Image16(out)


def write_pgm16(img: Image16) -> bytes:
    """Encode as binary PGM: header ``P5\\n<w> <h>\\n65535\\n``, big-endian samples."""
    header = f"P5\n{img.width} {img.height}\n65535\n".encode("ascii")
    return header + img.pixels.astype(">u2").tobytes()


def read_pgm16(data: bytes) -> Image16:
    """Decode the 16-bit PGM produced by write_pgm16 (bit-exact round trip)."""
    fields, offset = _read_netpbm_header(data, b"P5")
    width, height, maxval = fields
    if maxval != 65535:
        raise BadHeader(f"expected maxval 65535, got {maxval}")
    need = width * height * 2
    payload = data[offset:offset + need]
    if len(payload) < need:
        raise TruncatedPixels(f"expected {need} sample bytes, got {len(payload)}")
    pixels = np.frombuffer(payload, dtype=">u2").reshape(height, width)
    return Image16(pixels.astype(np.uint16))


def write_ppm8(rgb: np.ndarray) -> bytes:
    """Encode an (h, w, 3) uint8 raster as binary PPM (P6, maxval 255)."""
    arr = np.ascontiguousarray(rgb, dtype=np.uint8)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"expected (h, w, 3) rgb array, got shape {arr.shape}")
    header = f"P6\n{arr.shape[1]} {arr.shape[0]}\n255\n".encode("ascii")
    return header + arr.tobytes()


def read_ppm8(data: bytes) -> np.ndarray:
    fields, offset = _read_netpbm_header(data, b"P6")
    width, height, maxval = fields
    if maxval != 255:
        raise BadHeader(f"expected maxval 255, got {maxval}")
    need = width * height * 3
    payload = data[offset:offset + need]
    if len(payload) < need:
        raise TruncatedPixels(f"expected {need} sample bytes, got {len(payload)}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3).copy()


def _read_netpbm_header(data: bytes, magic: bytes) -> tuple[tuple[int, int, int], int]:
    """Parse ``<magic> <width> <height> <maxval>`` with whitespace separators.

    Returns ((width, height, maxval), offset_of_first_sample_byte).
    """
    if not data.startswith(magic):
        raise BadHeader(f"bad magic: {data[:2]!r}")
    pos = len(magic)
    fields: list[int] = []
    while len(fields) < 3:
        # Skip whitespace (and '#' comment lines, permitted by netpbm).
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1
        if start == pos:
            raise BadHeader("malformed header field")
        fields.append(int(data[start:pos]))
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise BadHeader("missing whitespace after maxval")
    pos += 1
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise BadHeader(f"bad dimensions {width}x{height}")
    return (width, height, maxval), pos
