"""8-bit raster types and file I/O.

The interchange format is binary P5 PGM (maxval 255); masks are P5 files
restricted to the values {0, 255}.  PNG is supported read-only, and RGB inputs
are reduced to their red channel, the only RGB-to-gray path in the pipeline.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .boxes import BoundingBox
from .errors import GeometryError, ImageFormatError


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class GrayImage:
    """Immutable single-channel 8-bit image, row-major, top-left origin."""

    pixels: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 2 or p.size == 0:
            raise GeometryError(f"gray image must be non-empty 2-D, got shape {p.shape}")
        if p.dtype != np.uint8:
            raise GeometryError(f"gray image must be uint8, got {p.dtype}")
        object.__setattr__(self, "pixels", _freeze(p))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class RgbImage:
    """Immutable interleaved 8-bit RGB image."""

    pixels: np.ndarray  # (height, width, 3) uint8

    def __post_init__(self):
        p = np.asarray(self.pixels)
        if p.ndim != 3 or p.shape[2] != 3 or p.shape[0] == 0 or p.shape[1] == 0:
            raise GeometryError(f"rgb image must be (h, w, 3), got shape {p.shape}")
        if p.dtype != np.uint8:
            raise GeometryError(f"rgb image must be uint8, got {p.dtype}")
        object.__setattr__(self, "pixels", _freeze(p))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


EYE_WIDTH = 640
EYE_HEIGHT = 480


@dataclass(frozen=True)
class EyeImage:
    """A cropped eye frame, fixed at exactly 640x480."""

    image: GrayImage

    def __post_init__(self):
        if self.image.width != EYE_WIDTH or self.image.height != EYE_HEIGHT:
            raise GeometryError(
                f"eye image must be {EYE_WIDTH}x{EYE_HEIGHT}, "
                f"got {self.image.width}x{self.image.height}"
            )

    @property
    def pixels(self) -> np.ndarray:
        return self.image.pixels


@dataclass(frozen=True)
class MaskImage:
    """Binary raster aligned with a source image; on-pixels mark the iris."""

    bits: np.ndarray  # (height, width) bool

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.ndim != 2 or b.size == 0:
            raise GeometryError(f"mask must be non-empty 2-D, got shape {b.shape}")
        if b.dtype != np.bool_:
            raise GeometryError(f"mask must be boolean, got {b.dtype}")
        object.__setattr__(self, "bits", _freeze(b))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def on_count(self) -> int:
        return int(np.count_nonzero(self.bits))


# --------------------------------------------------------------------------
# P5 PGM codec

def _read_pgm_tokens(data: bytes, path: str):
    """Parse the P5 header: magic, width, height, maxval, with # comments."""
    pos = 0
    tokens = []
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos >= len(data):
            raise ImageFormatError(f"{path}: truncated PGM header")
        if data[pos : pos + 1] == b"#":
            nl = data.find(b"\n", pos)
            if nl < 0:
                raise ImageFormatError(f"{path}: unterminated comment in header")
            pos = nl + 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates maxval from the raster
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise ImageFormatError(f"{path}: missing whitespace after maxval")
    return tokens, pos + 1


def load_gray(path) -> GrayImage:
    """Load an 8-bit grayscale image from a binary P5 PGM or a PNG file.

    PNG files may be gray or RGB; RGB decodes and routes through
    :func:`extract_red_channel`.  16-bit data is rejected.
    """
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise ImageFormatError(f"no such image file: {path}")
    with open(path, "rb") as f:
        head = f.read(8)
    if head.startswith(b"\x89PNG"):
        return _load_png(path)
    if not head.startswith(b"P5"):
        raise ImageFormatError(f"{path}: not a binary PGM (P5) or PNG file")

    with open(path, "rb") as f:
        data = f.read()
    tokens, offset = _read_pgm_tokens(data, path)
    if tokens[0] != b"P5":
        raise ImageFormatError(f"{path}: bad magic {tokens[0]!r}, expected P5")
    try:
        width, height, maxval = (int(t) for t in tokens[1:4])
    except ValueError:
        raise ImageFormatError(f"{path}: non-numeric header fields {tokens[1:4]}") from None
    if width < 1 or height < 1:
        raise ImageFormatError(f"{path}: invalid dimensions {width}x{height}")
    if maxval != 255:
        raise ImageFormatError(
            f"{path}: unsupported bit depth (maxval {maxval}, only 255 supported)"
        )
    payload = data[offset : offset + width * height]
    if len(payload) != width * height:
        raise ImageFormatError(
            f"{path}: raster truncated, expected {width * height} bytes, got {len(payload)}"
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width)
    return GrayImage(pixels)


def _load_png(path: str) -> GrayImage:
    from PIL import Image

    with Image.open(path) as im:
        if im.mode in ("I", "I;16", "I;16B", "I;16L"):
            raise ImageFormatError(f"{path}: unsupported bit depth (16-bit PNG)")
        if im.mode == "L":
            return GrayImage(np.asarray(im, dtype=np.uint8))
        if im.mode in ("RGB", "RGBA", "P"):
            rgb = np.asarray(im.convert("RGB"), dtype=np.uint8)
            return extract_red_channel(RgbImage(rgb))
        raise ImageFormatError(f"{path}: unsupported PNG mode {im.mode}")


def save_gray(img: GrayImage, path) -> None:
    """Write a binary P5 PGM with maxval 255."""
    path = os.fspath(path)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    with open(path, "wb") as f:
        f.write(header)
        f.write(img.pixels.tobytes())


def load_mask(path) -> MaskImage:
    """Load a mask stored as a P5 file with values restricted to {0, 255}."""
    gray = load_gray(path)
    values = np.unique(gray.pixels)
    if not np.all(np.isin(values, (0, 255))):
        raise ImageFormatError(
            f"{os.fspath(path)}: mask values must be 0 or 255, found {values[:8].tolist()}"
        )
    return MaskImage(gray.pixels == 255)


def save_mask(mask: MaskImage, path) -> None:
    save_gray(GrayImage(np.where(mask.bits, 255, 0).astype(np.uint8)), path)


# --------------------------------------------------------------------------
# Pixel operations

def extract_red_channel(img: RgbImage) -> GrayImage:
    """Take the R component of every pixel; dimensions are preserved."""
    return GrayImage(img.pixels[:, :, 0].copy())


def crop(img: GrayImage, box: BoundingBox) -> GrayImage:
    """Copy the half-open integer box out of the image, clamped to its bounds.

    No resampling: corners round to the nearest integer and the clamped box
    must stay non-empty, otherwise an "empty crop" error is raised.
    """
    x0 = max(0, min(img.width, int(round(box.x_min))))
    x1 = max(0, min(img.width, int(round(box.x_max))))
    y0 = max(0, min(img.height, int(round(box.y_min))))
    y1 = max(0, min(img.height, int(round(box.y_max))))
    if x1 <= x0 or y1 <= y0:
        raise GeometryError(
            f"empty crop: box ({box.x_min}, {box.y_min}, {box.x_max}, {box.y_max}) "
            f"does not intersect {img.width}x{img.height} image"
        )
    return GrayImage(img.pixels[y0:y1, x0:x1].copy())
