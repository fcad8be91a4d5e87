"""Image quality metrics and threshold gating for captured eye images.

Two cheap sharpness pre-checks (Laplacian variance and high-frequency FFT
energy) plus a ten-metric report in the style of ISO/IEC 29794-6, each
metric mapped to a fixed numeric range and compared strictly against its
threshold.  A capture is only enrolled or matched after it passes the gate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields

import numpy as np
from scipy import ndimage

from .errors import ShapeError
from .geometry import IrisBoundaries, check_within_image
from .imaging import EyeImage, GrayImage, MaskImage

# Band-pass kernel for the ISO-style sharpness score.  Integer LoG
# approximation over a 9x9 support; rows sum to zero overall.
LOG_KERNEL = np.array(
    [
        [0, 1, 1, 2, 2, 2, 1, 1, 0],
        [1, 2, 4, 5, 5, 5, 4, 2, 1],
        [1, 4, 5, 3, 0, 3, 5, 4, 1],
        [2, 5, 3, -12, -24, -12, 3, 5, 2],
        [2, 5, 0, -24, -40, -24, 0, 5, 2],
        [2, 5, 3, -12, -24, -12, 3, 5, 2],
        [1, 4, 5, 3, 0, 3, 5, 4, 1],
        [1, 2, 4, 5, 5, 5, 4, 2, 1],
        [0, 1, 1, 2, 2, 2, 1, 1, 0],
    ],
    dtype=np.int64,
)
SHARPNESS_C = 1800.0
GRAYSCALE_MAX_BITS = 8.0

CIRCULARITY_RAYS = 256
MIN_CIRCULARITY_SAMPLES = 16


def laplacian_sharpness(img: GrayImage) -> float:
    """Variance of the 3x3 Laplacian response over interior pixels."""
    p = img.pixels
    h, w = p.shape
    if h < 3 or w < 3:
        raise ShapeError(f"image {w}x{h} smaller than 3x3 kernel")
    s = p.astype(np.float64)
    resp = (
        s[:-2, 1:-1] + s[2:, 1:-1] + s[1:-1, :-2] + s[1:-1, 2:]
        - 4.0 * s[1:-1, 1:-1]
    )
    return float(resp.var())


def fft_sharpness(img: GrayImage) -> float:
    """Fraction of non-DC spectral power outside the central low-pass disk.

    The disk has radius min(W, H)/8 around the DC bin of the shifted
    spectrum.  An all-zero image is defined to score 0.
    """
    p = img.pixels
    h, w = p.shape
    if h < 16 or w < 16:
        raise ShapeError(f"image {w}x{h} smaller than 16x16")
    spectrum = np.fft.fftshift(np.fft.fft2(p.astype(np.float64)))
    power = np.abs(spectrum) ** 2
    cy, cx = h // 2, w // 2
    total = power.sum() - power[cy, cx]
    if total <= 0.0:
        return 0.0
    yy, xx = np.mgrid[0:h, 0:w]
    outside = (yy - cy) ** 2 + (xx - cx) ** 2 > (min(w, h) / 8.0) ** 2
    return float(power[outside].sum() / total)


@dataclass(frozen=True)
class QualityReport:
    overall_quality: float
    grayscale_utilization: float
    iris_pupil_contrast: float
    iris_pupil_concentricity: float
    iris_pupil_ratio: float
    iris_sclera_contrast: float
    margin_adequacy: float
    pupil_boundary_circularity: float
    sharpness: float
    usable_iris_area: float

    def to_json_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def from_json_dict(cls, d: dict) -> "QualityReport":
        return cls(**{f.name: float(d[f.name]) for f in fields(cls)})


@dataclass(frozen=True)
class QualityThresholds:
    """Minimum acceptable value per metric; comparisons are strict (>)."""

    overall_quality: float = 70.0
    grayscale_utilization: float = 6.0
    iris_pupil_contrast: float = 30.0
    iris_pupil_concentricity: float = 90.0
    iris_pupil_ratio_min: float = 20.0
    iris_pupil_ratio_max: float = 70.0
    iris_sclera_contrast: float = 5.0
    margin_adequacy: float = 80.0
    pupil_boundary_circularity: float = 70.0
    sharpness: float = 80.0
    usable_iris_area: float = 70.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise ValueError(f"threshold {f.name} must be finite, got {v!r}")
        if self.iris_pupil_ratio_min > self.iris_pupil_ratio_max:
            raise ValueError("iris_pupil_ratio band inverted")

    @classmethod
    def from_mapping(cls, m: dict) -> "QualityThresholds":
        known = {f.name for f in fields(cls)}
        unknown = set(m) - known
        if unknown:
            raise ValueError(f"unknown threshold keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in m.items()})


@dataclass(frozen=True)
class GateResult:
    passed: bool
    failures: tuple  # of (metric name, value, threshold)

    def to_json_dict(self) -> dict:
        return {
            "passed": self.passed,
            "failures": [
                {"metric": n, "value": v, "threshold": t} for n, v, t in self.failures
            ],
        }


def gate(report: QualityReport, thr: QualityThresholds = QualityThresholds()) -> GateResult:
    """Strict greater-than comparison of each metric, in declaration order.

    The pupil-to-iris ratio is gated on its lower band edge only.
    """
    checks = [
        ("overall_quality", report.overall_quality, thr.overall_quality),
        ("grayscale_utilization", report.grayscale_utilization,
         thr.grayscale_utilization),
        ("iris_pupil_contrast", report.iris_pupil_contrast, thr.iris_pupil_contrast),
        ("iris_pupil_concentricity", report.iris_pupil_concentricity,
         thr.iris_pupil_concentricity),
        ("iris_pupil_ratio", report.iris_pupil_ratio, thr.iris_pupil_ratio_min),
        ("iris_sclera_contrast", report.iris_sclera_contrast,
         thr.iris_sclera_contrast),
        ("margin_adequacy", report.margin_adequacy, thr.margin_adequacy),
        ("pupil_boundary_circularity", report.pupil_boundary_circularity,
         thr.pupil_boundary_circularity),
        ("sharpness", report.sharpness, thr.sharpness),
        ("usable_iris_area", report.usable_iris_area, thr.usable_iris_area),
    ]
    failures = tuple((n, v, t) for n, v, t in checks if not v > t)
    return GateResult(passed=not failures, failures=failures)


# --------------------------------------------------------------------------
# Metric computation


def _annulus_selector(shape, cx, cy, r_inner, r_outer):
    """Boolean selector plus bbox slices for an annulus clipped to the image."""
    h, w = shape
    x0 = max(0, int(math.floor(cx - r_outer)))
    x1 = min(w - 1, int(math.ceil(cx + r_outer)))
    y0 = max(0, int(math.floor(cy - r_outer)))
    y1 = min(h - 1, int(math.ceil(cy + r_outer)))
    if x0 > x1 or y0 > y1:
        return None
    yy, xx = np.mgrid[y0 : y1 + 1, x0 : x1 + 1]
    d2 = (xx - cx) ** 2 + (yy - cy) ** 2
    sel = (d2 >= r_inner * r_inner) & (d2 <= r_outer * r_outer)
    return sel, (slice(y0, y1 + 1), slice(x0, x1 + 1)), xx, yy


def _median_or_none(values: np.ndarray):
    return float(np.median(values)) if values.size else None


def _grayscale_utilization(eye_px, mask_bits) -> float:
    values = eye_px[mask_bits]
    if values.size == 0:
        return 0.0
    counts = np.bincount(values.ravel(), minlength=256)
    p = counts[counts > 0] / values.size
    return float(-(p * np.log2(p)).sum())


def _iris_pupil_contrast(eye_px, mask_bits, b: IrisBoundaries) -> float:
    cx, cy = b.pupil_center.x, b.pupil_center.y
    inner = _annulus_selector(eye_px.shape, cx, cy, 0.5 * b.pupil_radius,
                              0.9 * b.pupil_radius)
    outer = _annulus_selector(eye_px.shape, cx, cy, 1.1 * b.pupil_radius,
                              1.3 * b.pupil_radius)
    if inner is None or outer is None:
        return 0.0
    sel_p, box_p, _, _ = inner
    sel_i, box_i, _, _ = outer
    m_p = _median_or_none(eye_px[box_p][sel_p])
    m_i = _median_or_none(eye_px[box_i][sel_i & mask_bits[box_i]])
    if m_p is None or m_i is None:
        return 0.0
    return 100.0 * min(1.0, max(0.0, (m_i - m_p) / (m_i + m_p + 1.0)))


def _iris_sclera_contrast(eye_px, mask_bits, b: IrisBoundaries) -> float:
    cx, cy = b.iris_center.x, b.iris_center.y
    iris_side = _annulus_selector(eye_px.shape, cx, cy, 0.80 * b.iris_radius,
                                  0.95 * b.iris_radius)
    sclera_side = _annulus_selector(eye_px.shape, cx, cy, 1.05 * b.iris_radius,
                                    1.20 * b.iris_radius)
    if iris_side is None or sclera_side is None:
        return 0.0
    sel_i, box_i, _, _ = iris_side
    sel_s, box_s, xx, yy = sclera_side
    # keep the sclera samples in the nasal/temporal wedges, clear of eyelids
    ang = np.arctan2(yy - cy, xx - cx)
    wedge = (np.abs(ang) <= np.pi / 6.0) | (np.abs(ang) >= 5.0 * np.pi / 6.0)
    m_iris = _median_or_none(eye_px[box_i][sel_i & mask_bits[box_i]])
    m_sclera = _median_or_none(eye_px[box_s][sel_s & wedge])
    if m_iris is None or m_sclera is None:
        return 0.0
    return 100.0 * min(1.0, max(0.0, (m_sclera - m_iris) / (m_sclera + m_iris + 1.0)))


def _margin_adequacy(shape, b: IrisBoundaries) -> float:
    h, w = shape
    left = b.iris_center.x - b.iris_radius
    right = (w - 1) - (b.iris_center.x + b.iris_radius)
    top = b.iris_center.y - b.iris_radius
    bottom = (h - 1) - (b.iris_center.y + b.iris_radius)
    horiz = 0.6 * b.iris_radius
    vert = 0.2 * b.iris_radius
    score = min(1.0, left / horiz, right / horiz, top / vert, bottom / vert)
    return 100.0 * max(0.0, score)


def _circularity(mask_bits, b: IrisBoundaries) -> float:
    """Spread of the mask's inner-edge radius over rays from the pupil center."""
    h, w = mask_bits.shape
    cx, cy = b.pupil_center.x, b.pupil_center.y
    theta = 2.0 * np.pi * np.arange(CIRCULARITY_RAYS) / CIRCULARITY_RAYS
    steps = np.arange(1.0, 1.5 * b.iris_radius, 0.5)
    xs = np.rint(cx + steps[None, :] * np.cos(theta)[:, None]).astype(np.intp)
    ys = np.rint(cy + steps[None, :] * np.sin(theta)[:, None]).astype(np.intp)
    inside = (xs >= 0) & (xs < w) & (ys >= 0) & (ys < h)
    on = np.zeros(xs.shape, dtype=bool)
    on[inside] = mask_bits[ys[inside], xs[inside]]
    found = on.any(axis=1)
    if int(found.sum()) < MIN_CIRCULARITY_SAMPLES:
        return 0.0
    first = np.argmax(on, axis=1)
    radii = steps[first[found]]
    mu = float(radii.mean())
    sigma = float(radii.std())
    if mu <= 0.0:
        return 0.0
    return 100.0 * max(0.0, 1.0 - 2.0 * sigma / mu)


def _usable_iris_area(mask_bits, b: IrisBoundaries) -> float:
    h, w = mask_bits.shape
    sel = _annulus_selector((h, w), b.iris_center.x, b.iris_center.y, 0.0,
                            b.iris_radius)
    if sel is None:
        return 0.0
    sel_i, box, xx, yy = sel
    outside_pupil = (
        (xx - b.pupil_center.x) ** 2 + (yy - b.pupil_center.y) ** 2
        > b.pupil_radius * b.pupil_radius
    )
    annulus = sel_i & outside_pupil
    total = int(annulus.sum())
    if total == 0:
        return 0.0
    return 100.0 * float((mask_bits[box] & annulus).sum()) / total


def _iso_sharpness(eye_px, mask_bits) -> float:
    """Band-pass response power over the iris region, squashed to 0..100."""
    ys, xs = np.nonzero(mask_bits)
    if ys.size == 0:
        return 0.0
    h, w = eye_px.shape
    pad = 8
    y0, y1 = max(0, ys.min() - pad), min(h - 1, ys.max() + pad)
    x0, x1 = max(0, xs.min() - pad), min(w - 1, xs.max() + pad)
    sub = eye_px[y0 : y1 + 1, x0 : x1 + 1].astype(np.float64)
    resp = ndimage.convolve(sub, LOG_KERNEL.astype(np.float64), mode="constant")
    counted = mask_bits[y0 : y1 + 1, x0 : x1 + 1].copy()
    # only trust responses whose 9x9 window sits fully inside the image
    gy, gx = np.nonzero(counted)
    half = LOG_KERNEL.shape[0] // 2
    ok = (
        (gy + y0 >= half) & (gy + y0 < h - half)
        & (gx + x0 >= half) & (gx + x0 < w - half)
        & (gy >= half) & (gy < sub.shape[0] - half)
        & (gx >= half) & (gx < sub.shape[1] - half)
    )
    if not ok.any():
        return 0.0
    power = float((resp[gy[ok], gx[ok]] ** 2).mean())
    return 100.0 * power / (power + SHARPNESS_C * SHARPNESS_C)


def _overall(report_values: dict) -> float:
    """Geometric mean of the nine range-normalized constituents, scaled to 100."""
    normalized = [
        report_values["grayscale_utilization"] / GRAYSCALE_MAX_BITS,
        report_values["iris_pupil_contrast"] / 100.0,
        report_values["iris_pupil_concentricity"] / 100.0,
        report_values["iris_pupil_ratio"] / 100.0,
        report_values["iris_sclera_contrast"] / 100.0,
        report_values["margin_adequacy"] / 100.0,
        report_values["pupil_boundary_circularity"] / 100.0,
        report_values["sharpness"] / 100.0,
        report_values["usable_iris_area"] / 100.0,
    ]
    if any(v <= 0.0 for v in normalized):
        return 0.0
    log_mean = sum(math.log(min(v, 1.0)) for v in normalized) / len(normalized)
    return 100.0 * math.exp(log_mean)


def compute_metrics(eye: EyeImage, bounds: IrisBoundaries,
                    mask: MaskImage) -> QualityReport:
    """Evaluate the ten-metric quality report for a captured eye.

    The mask marks usable iris pixels and must match the eye's dimensions.
    """
    eye_px = eye.pixels
    if mask.bits.shape != eye_px.shape:
        raise ShapeError(
            f"mask {mask.bits.shape} does not match eye {eye_px.shape}"
        )
    h, w = eye_px.shape
    check_within_image(w, h, bounds)

    offset = math.hypot(
        bounds.pupil_center.x - bounds.iris_center.x,
        bounds.pupil_center.y - bounds.iris_center.y,
    )
    values = {
        "grayscale_utilization": _grayscale_utilization(eye_px, mask.bits),
        "iris_pupil_contrast": _iris_pupil_contrast(eye_px, mask.bits, bounds),
        "iris_pupil_concentricity": 100.0 * max(0.0, 1.0 - offset / bounds.iris_radius),
        "iris_pupil_ratio": 100.0 * bounds.pupil_radius / bounds.iris_radius,
        "iris_sclera_contrast": _iris_sclera_contrast(eye_px, mask.bits, bounds),
        "margin_adequacy": _margin_adequacy((h, w), bounds),
        "pupil_boundary_circularity": _circularity(mask.bits, bounds),
        "sharpness": _iso_sharpness(eye_px, mask.bits),
        "usable_iris_area": _usable_iris_area(mask.bits, bounds),
    }
    values["overall_quality"] = _overall(values)
    return QualityReport(**values)
