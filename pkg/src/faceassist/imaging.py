"""Grayscale raster primitives: PGM I/O, integral images, crop and resize.

Everything here is pure and immutable; images wrap read-only uint8 arrays
so they can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class PgmError(ValueError):
    """Malformed PGM data."""


class PgmMagicError(PgmError):
    """The magic number is not the binary-PGM 'P5'."""


class PgmMaxvalError(PgmError):
    """Maxval above 255 (16-bit PGM is not supported)."""


class PgmTruncatedError(PgmError):
    """Header promises more pixel data than the payload contains."""


def _as_pixel_array(width: int, height: int, pixels) -> np.ndarray:
    arr = np.asarray(pixels)
    if arr.ndim == 1:
        if arr.size != width * height:
            raise ValueError(
                f"expected {width * height} pixels, got {arr.size}"
            )
        arr = arr.reshape(height, width)
    elif arr.ndim == 2:
        if arr.shape != (height, width):
            raise ValueError(
                f"pixel array shape {arr.shape} does not match {height}x{width}"
            )
    else:
        raise ValueError("pixels must be a flat sequence or a 2-D array")
    if arr.dtype != np.uint8:
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise ValueError("intensities must lie in [0, 255]")
        arr = arr.astype(np.uint8)
    return arr


class GrayImage:
    """8-bit grayscale raster, row-major, immutable after construction."""

    __slots__ = ("width", "height", "pixels")

    def __init__(self, width: int, height: int, pixels):
        if width < 1 or height < 1:
            raise ValueError("image dimensions must be >= 1")
        arr = _as_pixel_array(width, height, pixels).copy()
        arr.setflags(write=False)
        object.__setattr__(self, "width", int(width))
        object.__setattr__(self, "height", int(height))
        object.__setattr__(self, "pixels", arr)

    def __setattr__(self, name, value):
        raise AttributeError("GrayImage is immutable")

    @classmethod
    def from_array(cls, arr) -> "GrayImage":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ValueError("expected a 2-D array")
        return cls(arr.shape[1], arr.shape[0], arr)

    @classmethod
    def constant(cls, width: int, height: int, value: int) -> "GrayImage":
        return cls(width, height, np.full((height, width), value, np.uint8))

    def at(self, x: int, y: int) -> int:
        return int(self.pixels[y, x])

    def __eq__(self, other) -> bool:
        if not isinstance(other, GrayImage):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and bool(np.array_equal(self.pixels, other.pixels))
        )

    def __hash__(self):
        return hash((self.width, self.height, self.pixels.tobytes()))

    def __repr__(self) -> str:
        return f"GrayImage({self.width}x{self.height})"


@dataclass(frozen=True)
class Rect:
    """Axis-aligned pixel rectangle; x/y top-left corner, w/h >= 1."""

    x: int
    y: int
    w: int
    h: int

    def __post_init__(self):
        if self.x < 0 or self.y < 0:
            raise ValueError(f"rect origin must be non-negative: {self}")
        if self.w < 1 or self.h < 1:
            raise ValueError(f"rect sides must be >= 1: {self}")

    @property
    def area(self) -> int:
        return self.w * self.h

    def iou(self, other: "Rect") -> float:
        """Intersection-over-union overlap in [0, 1]."""
        ix = max(self.x, other.x)
        iy = max(self.y, other.y)
        ix2 = min(self.x + self.w, other.x + other.w)
        iy2 = min(self.y + self.h, other.y + other.h)
        iw = max(0, ix2 - ix)
        ih = max(0, iy2 - iy)
        inter = iw * ih
        if inter == 0:
            return 0.0
        return inter / (self.area + other.area - inter)


class IntegralImage:
    """Summed-area tables (plain and squared) with a zero top/left border.

    Tables are (h+1) x (w+1) int64; entry [y, x] is the sum over all pixels
    strictly above and left of (x, y).  int64 is overflow-safe up to
    4096x4096 at intensity 255 even for the squared table.
    """

    __slots__ = ("width", "height", "sums", "squared_sums")

    def __init__(self, width: int, height: int, sums: np.ndarray, squared_sums: np.ndarray):
        object.__setattr__(self, "width", width)
        object.__setattr__(self, "height", height)
        object.__setattr__(self, "sums", sums)
        object.__setattr__(self, "squared_sums", squared_sums)

    def __setattr__(self, name, value):
        raise AttributeError("IntegralImage is immutable")


def integral(img: GrayImage) -> IntegralImage:
    """Build the summed-area tables for an image."""
    px = img.pixels.astype(np.int64)
    sums = np.zeros((img.height + 1, img.width + 1), np.int64)
    sq = np.zeros_like(sums)
    np.cumsum(np.cumsum(px, axis=0), axis=1, out=sums[1:, 1:])
    np.cumsum(np.cumsum(px * px, axis=0), axis=1, out=sq[1:, 1:])
    sums.setflags(write=False)
    sq.setflags(write=False)
    return IntegralImage(img.width, img.height, sums, sq)


def _check_bounds(ii_w: int, ii_h: int, r: Rect):
    if r.x + r.w > ii_w or r.y + r.h > ii_h:
        raise ValueError(f"rect {r} exceeds image bounds {ii_w}x{ii_h}")


def rect_sum(ii: IntegralImage, r: Rect) -> int:
    """Sum of intensities inside ``r``, O(1) via the summed-area table."""
    _check_bounds(ii.width, ii.height, r)
    s = ii.sums
    return int(
        s[r.y + r.h, r.x + r.w]
        - s[r.y, r.x + r.w]
        - s[r.y + r.h, r.x]
        + s[r.y, r.x]
    )


def squared_rect_sum(ii: IntegralImage, r: Rect) -> int:
    _check_bounds(ii.width, ii.height, r)
    s = ii.squared_sums
    return int(
        s[r.y + r.h, r.x + r.w]
        - s[r.y, r.x + r.w]
        - s[r.y + r.h, r.x]
        + s[r.y, r.x]
    )


def crop(img: GrayImage, r: Rect) -> GrayImage:
    """Extract the sub-image covered by ``r``."""
    _check_bounds(img.width, img.height, r)
    return GrayImage(r.w, r.h, img.pixels[r.y : r.y + r.h, r.x : r.x + r.w])


def rgb_to_gray(r: int, g: int, b: int) -> int:
    """ITU-R 601 luma of an 8-bit RGB triple, rounded to an intensity."""
    for c in (r, g, b):
        if not 0 <= c <= 255:
            raise ValueError("rgb components must lie in [0, 255]")
    y = 0.299 * r + 0.587 * g + 0.114 * b
    return min(255, max(0, int(np.floor(y + 0.5))))


def resize_bilinear(img: GrayImage, w: int, h: int) -> GrayImage:
    """Bilinear resample with pixel-center alignment.

    Source coordinate for destination index d is (d + 0.5) * scale - 0.5,
    clamped to the source range; results round half-up.
    """
    if w < 1 or h < 1:
        raise ValueError("target dimensions must be >= 1")
    if w == img.width and h == img.height:
        return img
    src = img.pixels.astype(np.float64)

    def axis_coords(dst_n: int, src_n: int):
        scale = src_n / dst_n
        pos = (np.arange(dst_n) + 0.5) * scale - 0.5
        pos = np.clip(pos, 0.0, src_n - 1)
        lo = np.floor(pos).astype(np.int64)
        hi = np.minimum(lo + 1, src_n - 1)
        frac = pos - lo
        return lo, hi, frac

    x0, x1, fx = axis_coords(w, img.width)
    y0, y1, fy = axis_coords(h, img.height)
    fx = fx[np.newaxis, :]
    fy = fy[:, np.newaxis]
    top = src[y0][:, x0] * (1 - fx) + src[y0][:, x1] * fx
    bot = src[y1][:, x0] * (1 - fx) + src[y1][:, x1] * fx
    out = top * (1 - fy) + bot * fy
    out = np.clip(np.floor(out + 0.5), 0, 255).astype(np.uint8)
    return GrayImage(w, h, out)


def load_pgm(data: bytes) -> GrayImage:
    """Parse a binary (P5) PGM byte string; '#' comment lines are allowed."""
    if not data.startswith(b"P5"):
        got = data[:2].decode("latin-1", "replace") if data else "<empty>"
        raise PgmMagicError(f"unsupported magic {got!r}, expected 'P5'")

    tokens: list[bytes] = []
    i = 2
    n = len(data)
    # Tokenize the header: three size/maxval tokens separated by whitespace,
    # with comments running to end of line.
    while len(tokens) < 3:
        while i < n and data[i : i + 1].isspace():
            i += 1
        if i < n and data[i : i + 1] == b"#":
            while i < n and data[i : i + 1] != b"\n":
                i += 1
            continue
        start = i
        while i < n and not data[i : i + 1].isspace() and data[i : i + 1] != b"#":
            i += 1
        if start == i:
            raise PgmError("truncated header")
        tokens.append(data[start:i])
    if i >= n or not data[i : i + 1].isspace():
        raise PgmError("missing whitespace after maxval")
    i += 1  # the single separator before raw pixel data

    try:
        width, height, maxval = (int(t) for t in tokens)
    except ValueError as exc:
        raise PgmError(f"non-numeric header token: {exc}") from None
    if width < 1 or height < 1:
        raise PgmError(f"invalid dimensions {width}x{height}")
    if maxval > 255:
        raise PgmMaxvalError(f"maxval {maxval} exceeds 255")
    if maxval < 1:
        raise PgmError(f"invalid maxval {maxval}")

    expected = width * height
    raw = data[i : i + expected]
    if len(raw) < expected:
        raise PgmTruncatedError(
            f"expected {expected} pixel bytes, got {len(raw)}"
        )
    return GrayImage(width, height, np.frombuffer(raw, np.uint8))


def save_pgm(img: GrayImage) -> bytes:
    """Serialize to the canonical binary PGM form (inverse of load_pgm)."""
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()
