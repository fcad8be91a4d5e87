"""Row-wise complex Gabor filtering of the normalized iris, producing bits.

Each filter is a 1-D Gaussian-windowed complex exponential applied along
the angular axis with circular wrap.  The sign of the real and imaginary
responses gives one bit each per sample, so a single filter yields the
two-plane template; configuring several wavelengths multiplies the planes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .errors import ConfigError, ShapeError
from .geometry import ANGULAR_SAMPLES, NormalizedIris, NormalizedMask
from .template import IrisTemplate

DEFAULT_WAVELENGTH = 18.0
SIGMA_FACTOR = 0.5  # sigma = SIGMA_FACTOR * wavelength
HALF_WIDTH_SIGMAS = 2.0  # taps cover +/- 2 sigma, rounded up
MAX_WAVELENGTH = 256.0


@dataclass(frozen=True)
class GaborFilter:
    """One complex kernel: taps g(n) for n in [-half_width, half_width]."""

    wavelength: float
    sigma: float
    half_width: int
    real_taps: np.ndarray
    imag_taps: np.ndarray

    def __post_init__(self):
        for name in ("real_taps", "imag_taps"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        n = 2 * self.half_width + 1
        if self.real_taps.shape != (n,) or self.imag_taps.shape != (n,):
            raise ConfigError(f"tap arrays must have length {n}")

    @property
    def width(self) -> int:
        return 2 * self.half_width + 1


@dataclass(frozen=True)
class GaborBank:
    filters: Tuple[GaborFilter, ...]

    def __post_init__(self):
        object.__setattr__(self, "filters", tuple(self.filters))
        if not self.filters:
            raise ConfigError("filter bank is empty")

    @property
    def planes(self) -> int:
        return 2 * len(self.filters)


def _make_filter(wavelength: float) -> GaborFilter:
    if not (isinstance(wavelength, (int, float)) and math.isfinite(wavelength)):
        raise ConfigError(f"wavelength must be a finite number, got {wavelength!r}")
    if wavelength <= 0 or wavelength > MAX_WAVELENGTH:
        raise ConfigError(
            f"wavelength must be in (0, {MAX_WAVELENGTH:g}], got {wavelength:g}"
        )
    sigma = SIGMA_FACTOR * float(wavelength)
    half_width = int(math.ceil(HALF_WIDTH_SIGMAS * sigma))
    if 2 * half_width + 1 > ANGULAR_SAMPLES:
        raise ConfigError(
            f"kernel width {2 * half_width + 1} exceeds {ANGULAR_SAMPLES} columns"
        )
    n = np.arange(-half_width, half_width + 1, dtype=np.float64)
    envelope = np.exp(-(n * n) / (2.0 * sigma * sigma))
    phase = 2.0 * np.pi * n / float(wavelength)
    real = envelope * np.cos(phase)
    imag = envelope * np.sin(phase)
    real = real - real.mean()  # DC-free so constant regions give zero response
    return GaborFilter(float(wavelength), sigma, half_width, real, imag)


def build_bank(wavelengths: Sequence[float] = (DEFAULT_WAVELENGTH,)) -> GaborBank:
    """Construct the filter bank; one complex filter per wavelength."""
    return GaborBank(tuple(_make_filter(w) for w in wavelengths))


def _circular_response(samples: np.ndarray, taps: np.ndarray, half_width: int) -> np.ndarray:
    """resp[k, j] = sum_n taps[n] * samples[k, (j + n) mod width].

    Terms accumulate in ascending n in float64, which keeps the sums
    bit-identical to a per-sample ordered loop.
    """
    resp = np.zeros(samples.shape, dtype=np.float64)
    for i, n in enumerate(range(-half_width, half_width + 1)):
        resp += taps[i] * np.roll(samples, -n, axis=1)
    return resp


def _support_valid(mask_bits: np.ndarray, half_width: int) -> np.ndarray:
    """On iff the sample and every tap position under the kernel are mask-on."""
    valid = mask_bits.copy()
    for n in range(-half_width, half_width + 1):
        if n == 0:
            continue
        valid &= np.roll(mask_bits, -n, axis=1)
    return valid


def encode(iris: NormalizedIris, mask: NormalizedMask, bank: GaborBank = None) -> IrisTemplate:
    """Produce the packed template: sign bits of each filter's response.

    A response of exactly zero encodes 1 (the >= 0 convention).  Template
    mask bits require the full kernel support to land on valid samples.
    """
    if bank is None:
        bank = build_bank()
    samples = iris.samples.astype(np.float64)
    mask_bits = mask.bits
    if samples.shape != mask_bits.shape:
        raise ShapeError(
            f"iris {samples.shape} and mask {mask_bits.shape} extents differ"
        )
    code_planes = []
    mask_planes = []
    for filt in bank.filters:
        real = _circular_response(samples, filt.real_taps, filt.half_width)
        imag = _circular_response(samples, filt.imag_taps, filt.half_width)
        valid = _support_valid(mask_bits, filt.half_width)
        code_planes.append(real >= 0.0)
        code_planes.append(imag >= 0.0)
        mask_planes.append(valid)
        mask_planes.append(valid.copy())
    return IrisTemplate.from_bit_planes(np.stack(code_planes), np.stack(mask_planes))
