"""Raster types, grayscale conversion, standard-deviation filtering and PNM I/O.

Only 8-bit binary PGM (``P5``) and PPM (``P6``) files are understood. Corpus
preparation is expected to convert anything else offline.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._io import write_bytes
from .errors import DimensionError, ParseError

# ITU-R BT.601 luma weights in thousandths; integer sums keep white exact.
LUMA_PERMILLE = np.array([299, 587, 114], dtype=np.int64)

# Largest population std attainable by values confined to [0, 1].
STD_SUPREMUM = 0.5


@dataclass(frozen=True, eq=False)
class RgbImage:
    """8-bit RGB raster stored as a ``(height, width, 3)`` uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 3 or px.shape[2] != 3:
            raise DimensionError(f"RGB pixels must have shape (h, w, 3), got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise DimensionError("RGB image must be at least 1x1")
        px = px.astype(np.uint8, copy=True)
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Grayscale raster with intensities in [0, 1], shape ``(height, width)``."""

    pixels: np.ndarray

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.float64)
        if px.ndim != 2:
            raise DimensionError(f"gray pixels must be 2-D, got shape {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise DimensionError("gray image must be at least 1x1")
        if not np.all(np.isfinite(px)) or px.min() < 0.0 or px.max() > 1.0:
            raise ValueError("gray intensities must lie in [0, 1]")
        px.flags.writeable = False
        object.__setattr__(self, "pixels", px)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @classmethod
    def from_uint8(cls, data) -> "GrayImage":
        return cls(np.asarray(data, dtype=np.float64) / 255.0)

    def to_uint8(self) -> np.ndarray:
        return np.rint(self.pixels * 255.0).astype(np.uint8)


def to_grayscale(img: RgbImage) -> GrayImage:
    """Per-pixel BT.601 luma scaled to [0, 1]."""
    luma = (img.pixels.astype(np.int64) @ LUMA_PERMILLE) / 255000.0
    return GrayImage(np.clip(luma, 0.0, 1.0))


def stddev_filter(img: GrayImage, radius: int = 1) -> GrayImage:
    """Local population standard deviation over a ``(2r+1)^2`` window.

    Borders are replicate-padded. The result is divided by 0.5, the largest
    std values in [0, 1] can have, and clamped so it stays in [0, 1].
    """
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    size = 2 * radius + 1
    padded = np.pad(img.pixels, radius, mode="edge")
    windows = sliding_window_view(padded, (size, size))
    std = windows.std(axis=(-2, -1))
    # Floating-point mean of identical values is not always exact.
    flat = windows.max(axis=(-2, -1)) == windows.min(axis=(-2, -1))
    std[flat] = 0.0
    return GrayImage(np.clip(std / STD_SUPREMUM, 0.0, 1.0))


def average(images) -> GrayImage:
    """Pixel-wise mean of equally sized gray images."""
    images = list(images)
    if not images:
        raise ValueError("cannot average zero images")
    shape = images[0].pixels.shape
    for im in images[1:]:
        if im.pixels.shape != shape:
            raise DimensionError(
                f"cannot average images of shapes {shape} and {im.pixels.shape}"
            )
    stack = np.stack([im.pixels for im in images])
    return GrayImage(np.clip(stack.mean(axis=0), 0.0, 1.0))


def center_crop(img: GrayImage, multiple: int) -> GrayImage:
    """Crop symmetrically so both sides become multiples of ``multiple``."""
    h = img.height - img.height % multiple
    w = img.width - img.width % multiple
    if h == 0 or w == 0:
        raise DimensionError(
            f"{img.width}x{img.height} image is smaller than one {multiple}-pixel block"
        )
    top = (img.height - h) // 2
    left = (img.width - w) // 2
    return GrayImage(img.pixels[top : top + h, left : left + w])


# --- PNM I/O -------------------------------------------------------------


def _read_header(data: bytes, path):
    """Return (magic, tokens, offset) for a binary PNM header."""
    tokens = []
    pos = 0
    n = len(data)
    while len(tokens) < 4:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise ParseError("truncated PNM header", path)
        tokens.append(data[start:pos])
    # Exactly one whitespace byte separates the header from the raster.
    if pos >= n or not data[pos : pos + 1].isspace():
        raise ParseError("missing whitespace after PNM header", path)
    return tokens[0], tokens[1:], pos + 1


def read_pnm(path) -> GrayImage | RgbImage:
    """Read a binary PGM as :class:`GrayImage` or binary PPM as :class:`RgbImage`."""
    with open(path, "rb") as fh:
        data = fh.read()
    return parse_pnm(data, path)


def parse_pnm(data: bytes, path=None) -> GrayImage | RgbImage:
    magic, fields, offset = _read_header(data, path)
    if magic not in (b"P5", b"P6"):
        raise ParseError(
            f"unsupported magic number {magic.decode('latin-1')!r} (expected P5 or P6)", path
        )
    try:
        width, height, maxval = (int(f) for f in fields)
    except ValueError:
        raise ParseError("non-numeric PNM header field", path) from None
    if maxval != 255:
        raise ParseError(f"unsupported maxval {maxval} (only 255 is accepted)", path)
    if width < 1 or height < 1:
        raise ParseError(f"invalid dimensions {width}x{height}", path)
    channels = 1 if magic == b"P5" else 3
    expected = width * height * channels
    raster = data[offset : offset + expected]
    if len(raster) != expected:
        raise ParseError(f"raster has {len(raster)} bytes, expected {expected}", path)
    arr = np.frombuffer(raster, dtype=np.uint8)
    if channels == 1:
        return GrayImage.from_uint8(arr.reshape(height, width))
    return RgbImage(arr.reshape(height, width, 3))


def load_gray(path) -> GrayImage:
    """Read a PGM or PPM and return it as grayscale."""
    img = read_pnm(path)
    if isinstance(img, RgbImage):
        return to_grayscale(img)
    return img


def write_pgm(path, img: GrayImage) -> None:
    data = img.to_uint8()
    write_bytes(path, b"P5\n%d %d\n255\n" % (img.width, img.height) + data.tobytes())


def write_ppm(path, img: RgbImage) -> None:
    write_bytes(path, b"P6\n%d %d\n255\n" % (img.width, img.height) + img.pixels.tobytes())

