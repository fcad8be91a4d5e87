"""Packed binary iris templates and the template file codec.

A template holds one code plane per Gabor phase component (real and
imaginary for the default single-filter bank) plus matching validity
planes.  Each plane is 512 columns by 64 rows of bits, packed LSB-first
into eight 64-bit words per row, so the Hamming-distance hot path is pure
word-wise XOR/AND/popcount.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ShapeError, TemplateFormatError

WIDTH = 512
HEIGHT = 64
WORDS_PER_ROW = WIDTH // 64

MAGIC = b"IRT1"
VERSION = 1


def pack_plane(bits: np.ndarray) -> np.ndarray:
    """(64, 512) bool -> (64, 8) uint64, column c at word c >> 6, bit c & 63."""
    if bits.shape != (HEIGHT, WIDTH):
        raise ShapeError(f"plane must be {HEIGHT}x{WIDTH}, got {bits.shape}")
    packed = np.packbits(bits.astype(bool), axis=1, bitorder="little")
    return packed.view("<u8").copy()


def unpack_plane(words: np.ndarray) -> np.ndarray:
    """(64, 8) uint64 -> (64, 512) bool."""
    if words.shape != (HEIGHT, WORDS_PER_ROW):
        raise ShapeError(
            f"packed plane must be {HEIGHT}x{WORDS_PER_ROW} words, got {words.shape}"
        )
    as_bytes = np.ascontiguousarray(words, dtype="<u8").view(np.uint8)
    return np.unpackbits(as_bytes, axis=1, bitorder="little").astype(bool)


@dataclass(frozen=True)
class IrisTemplate:
    """Bit-packed iris code and validity mask, plane-major."""

    code: np.ndarray  # (planes, HEIGHT, WORDS_PER_ROW) uint64
    mask: np.ndarray  # same geometry

    def __post_init__(self):
        code = np.ascontiguousarray(self.code, dtype="<u8")
        mask = np.ascontiguousarray(self.mask, dtype="<u8")
        if code.ndim != 3 or code.shape[1:] != (HEIGHT, WORDS_PER_ROW):
            raise ShapeError(
                f"code must be (planes, {HEIGHT}, {WORDS_PER_ROW}), got {code.shape}"
            )
        if code.shape[0] < 2 or code.shape[0] % 2:
            raise ShapeError(
                f"plane count must be even and >= 2, got {code.shape[0]}"
            )
        if mask.shape != code.shape:
            raise ShapeError(
                f"mask shape {mask.shape} does not match code shape {code.shape}"
            )
        code.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "code", code)
        object.__setattr__(self, "mask", mask)

    @property
    def planes(self) -> int:
        return self.code.shape[0]

    @classmethod
    def from_bit_planes(cls, code_bits: np.ndarray, mask_bits: np.ndarray) -> "IrisTemplate":
        """Build from (planes, 64, 512) boolean arrays."""
        if code_bits.shape != mask_bits.shape or code_bits.ndim != 3:
            raise ShapeError(
                f"bit plane shapes disagree: {code_bits.shape} vs {mask_bits.shape}"
            )
        code = np.stack([pack_plane(p) for p in code_bits])
        mask = np.stack([pack_plane(p) for p in mask_bits])
        return cls(code, mask)

    def code_bits(self) -> np.ndarray:
        return np.stack([unpack_plane(p) for p in self.code])

    def mask_bits(self) -> np.ndarray:
        return np.stack([unpack_plane(p) for p in self.mask])


def _rotate_words(words: np.ndarray, shift: int) -> np.ndarray:
    """Rotate packed rows rightward by ``shift`` columns without unpacking."""
    s = shift % WIDTH
    if s == 0:
        return words.copy()
    word_shift, bit_shift = divmod(s, 64)
    rolled = np.roll(words, word_shift, axis=-1)
    if bit_shift == 0:
        return rolled
    carry = np.roll(rolled, 1, axis=-1)
    bs = np.uint64(bit_shift)
    inv = np.uint64(64 - bit_shift)
    return (rolled << bs) | (carry >> inv)


def rotate_template(t: IrisTemplate, shift: int) -> IrisTemplate:
    """Circularly shift all planes by ``shift`` columns (positive = rightward)."""
    return IrisTemplate(_rotate_words(t.code, shift), _rotate_words(t.mask, shift))


def save_template(t: IrisTemplate, path) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IIII", VERSION, t.planes, WIDTH, HEIGHT))
        f.write(np.ascontiguousarray(t.code, dtype="<u8").tobytes())
        f.write(np.ascontiguousarray(t.mask, dtype="<u8").tobytes())


def load_template(path) -> IrisTemplate:
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise TemplateFormatError(f"cannot read template {path}: {e}") from None
    if blob[:4] != MAGIC:
        raise TemplateFormatError(f"{path}: not a template file (bad magic)")
    if len(blob) < 20:
        raise TemplateFormatError(f"{path}: truncated header")
    version, planes, width, height = struct.unpack("<IIII", blob[4:20])
    if version != VERSION:
        raise TemplateFormatError(f"{path}: unsupported version {version}")
    if width != WIDTH or height != HEIGHT:
        raise TemplateFormatError(
            f"{path}: unsupported geometry {width}x{height}"
        )
    if planes < 2 or planes % 2:
        raise TemplateFormatError(f"{path}: bad plane count {planes}")
    plane_bytes = planes * HEIGHT * WORDS_PER_ROW * 8
    if len(blob) != 20 + 2 * plane_bytes:
        raise TemplateFormatError(
            f"{path}: expected {20 + 2 * plane_bytes} bytes, got {len(blob)}"
        )
    shape = (planes, HEIGHT, WORDS_PER_ROW)
    code = np.frombuffer(blob, dtype="<u8", count=plane_bytes // 8, offset=20)
    mask = np.frombuffer(blob, dtype="<u8", count=plane_bytes // 8,
                         offset=20 + plane_bytes)
    return IrisTemplate(code.reshape(shape), mask.reshape(shape))
