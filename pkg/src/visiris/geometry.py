"""Circle parameterization of the iris mask and rubber-sheet normalization.

The segmentation mask is reduced to two circles (pupillary and limbic
boundaries) with a circular Hough transform over an edge map of the mask, and
the iris annulus is unrolled into a fixed 512x64 pseudo-polar rectangle.  The
same sampling grid is applied to the mask so downstream coding knows which
samples are valid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .boxes import PixelPoint
from .errors import BoundaryFitError, GeometryError
from .imaging import EyeImage, GrayImage, MaskImage

ANGULAR_SAMPLES = 512
RADIAL_SAMPLES = 64

MIN_PUPIL_RADIUS = 5.0


@dataclass(frozen=True)
class IrisBoundaries:
    """Pupil and limbic circles parameterizing the iris annulus."""

    pupil_center: PixelPoint
    pupil_radius: float
    iris_center: PixelPoint
    iris_radius: float

    def __post_init__(self):
        if not (math.isfinite(self.pupil_radius) and math.isfinite(self.iris_radius)):
            raise GeometryError("radii must be finite")
        if self.pupil_radius < MIN_PUPIL_RADIUS:
            raise GeometryError(
                f"pupil radius {self.pupil_radius:.2f} below minimum {MIN_PUPIL_RADIUS}"
            )
        if self.iris_radius <= self.pupil_radius:
            raise GeometryError(
                f"iris radius {self.iris_radius:.2f} must exceed pupil radius "
                f"{self.pupil_radius:.2f}"
            )

    def to_json_dict(self) -> dict:
        return {
            "pupil": {"cx": self.pupil_center.x, "cy": self.pupil_center.y,
                      "r": self.pupil_radius},
            "iris": {"cx": self.iris_center.x, "cy": self.iris_center.y,
                     "r": self.iris_radius},
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "IrisBoundaries":
        try:
            p, i = d["pupil"], d["iris"]
            return cls(
                PixelPoint(float(p["cx"]), float(p["cy"])), float(p["r"]),
                PixelPoint(float(i["cx"]), float(i["cy"])), float(i["r"]),
            )
        except (KeyError, TypeError) as e:
            raise GeometryError(f"malformed bounds JSON: {e!r}") from None


def save_bounds(b: IrisBoundaries, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(b.to_json_dict(), f, indent=2)
        f.write("\n")


def load_bounds(path) -> IrisBoundaries:
    with open(path, "r", encoding="utf-8") as f:
        return IrisBoundaries.from_json_dict(json.load(f))


@dataclass(frozen=True)
class NormalizedIris:
    """Unrolled iris texture: 512 angular columns by 64 radial rows."""

    samples: np.ndarray  # (RADIAL_SAMPLES, ANGULAR_SAMPLES) uint8

    def __post_init__(self):
        s = np.asarray(self.samples)
        if s.shape != (RADIAL_SAMPLES, ANGULAR_SAMPLES) or s.dtype != np.uint8:
            raise GeometryError(
                f"normalized iris must be uint8 {RADIAL_SAMPLES}x{ANGULAR_SAMPLES}, "
                f"got {s.dtype} {s.shape}"
            )
        s = np.ascontiguousarray(s)
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)

    def to_gray(self) -> GrayImage:
        return GrayImage(self.samples.copy())


@dataclass(frozen=True)
class NormalizedMask:
    """Validity bits aligned sample-for-sample with a NormalizedIris."""

    bits: np.ndarray  # (RADIAL_SAMPLES, ANGULAR_SAMPLES) bool

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.shape != (RADIAL_SAMPLES, ANGULAR_SAMPLES) or b.dtype != np.bool_:
            raise GeometryError(
                f"normalized mask must be bool {RADIAL_SAMPLES}x{ANGULAR_SAMPLES}, "
                f"got {b.dtype} {b.shape}"
            )
        b = np.ascontiguousarray(b)
        b.setflags(write=False)
        object.__setattr__(self, "bits", b)

    def to_mask_image(self) -> MaskImage:
        return MaskImage(self.bits.copy())


# --------------------------------------------------------------------------
# Circular Hough fit

MIN_MASK_ON_PIXELS = 200
MIN_EDGE_PIXELS = 60
PEAK_FRACTION = 0.3  # of the theoretical (full-circle) vote count
LIMBIC_RADIUS_RANGE = (30, 300)
PUPIL_MIN_RADIUS = 8
PUPIL_MAX_RADIUS_FACTOR = 0.8
PUPIL_CENTER_FACTOR = 0.25


def edge_pixels(bits: np.ndarray) -> np.ndarray:
    """On-pixels with at least one off 4-neighbour (outside counts as off).

    Returns an (N, 2) array of (x, y) coordinates.
    """
    padded = np.zeros((bits.shape[0] + 2, bits.shape[1] + 2), dtype=bool)
    padded[1:-1, 1:-1] = bits
    core = padded[1:-1, 1:-1]
    neighbour_off = (
        ~padded[:-2, 1:-1] | ~padded[2:, 1:-1] | ~padded[1:-1, :-2] | ~padded[1:-1, 2:]
    )
    ys, xs = np.nonzero(core & neighbour_off)
    return np.stack([xs, ys], axis=1)


def _vote_histograms(centers: np.ndarray, edges: np.ndarray, r_max: int) -> np.ndarray:
    """Vote counts per (center, integer radius): a distance histogram.

    ``accumulator[m, r]`` counts edge pixels whose rounded distance from
    center m equals r; this is exactly the circular Hough accumulator value
    at 1-px center and radius resolution.
    """
    n_centers = centers.shape[0]
    acc = np.zeros((n_centers, r_max + 1), dtype=np.int64)
    chunk = max(1, int(4_000_000 // max(1, edges.shape[0])))
    for lo in range(0, n_centers, chunk):
        cs = centers[lo : lo + chunk].astype(np.float64)
        d = np.sqrt(
            (cs[:, None, 0] - edges[None, :, 0]) ** 2
            + (cs[:, None, 1] - edges[None, :, 1]) ** 2
        )
        bins = np.clip(np.rint(d).astype(np.int64), 0, r_max)
        offset = np.arange(cs.shape[0])[:, None] * (r_max + 1)
        flat = np.bincount((bins + offset).ravel(), minlength=cs.shape[0] * (r_max + 1))
        acc[lo : lo + cs.shape[0]] = flat.reshape(cs.shape[0], r_max + 1)
    return acc


def _normalize(acc: np.ndarray) -> np.ndarray:
    radii = np.arange(acc.shape[1], dtype=np.float64)
    circumference = 2.0 * np.pi * np.maximum(radii, 1.0)
    return acc / circumference


def _grid(x0, x1, y0, y1, stride) -> np.ndarray:
    xs = np.arange(x0, x1 + 1, stride)
    ys = np.arange(y0, y1 + 1, stride)
    gx, gy = np.meshgrid(xs, ys)
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def _centroid_refine(centers, norm, m, r):
    """Sub-pixel estimate: vote-weighted centroid over the 3x3x3 peak cube."""
    cx, cy = centers[m]
    sel_r = np.arange(max(0, r - 1), min(norm.shape[1] - 1, r + 1) + 1)
    near = (np.abs(centers[:, 0] - cx) <= 1) & (np.abs(centers[:, 1] - cy) <= 1)
    idx = np.nonzero(near)[0]
    w = norm[np.ix_(idx, sel_r)]
    total = float(w.sum())
    if total <= 0:
        return float(cx), float(cy), float(r)
    cx_f = float((w.sum(axis=1) * centers[idx, 0]).sum() / total)
    cy_f = float((w.sum(axis=1) * centers[idx, 1]).sum() / total)
    r_f = float((w.sum(axis=0) * sel_r).sum() / total)
    return cx_f, cy_f, r_f


def _best_circle(edges, x0, x1, y0, y1, r_lo, r_hi, prefer_outer: bool,
                 coarse_stride: int = 4):
    """Two-stage accumulator search: strided sweep, then 1-px refinement.

    The coarse sweep only ranks centers (max vote over the radius range),
    since strided centers smear votes across radius bins.  Radius selection
    happens on the fine accumulator, where a full circle votes its entire
    circumference into one bin.  With radius-normalized votes the inner and
    outer boundaries of an annulus both produce near-full-strength peaks, so
    ``prefer_outer`` breaks the tie toward the largest radius among fine
    peaks within 60% of the strongest.  That ranking sums each radius with
    its two neighbours first: a boundary sitting near a half-integer radius
    splits its votes across two bins, and without the window the split peak
    loses the tie to a concentrated one.
    """
    r_max = r_hi + 2
    step = max(1, edges.shape[0] // 1500)  # decimate edges for the ranking pass
    coarse_centers = _grid(x0, x1, y0, y1, coarse_stride)
    coarse = _normalize(_vote_histograms(coarse_centers, edges[::step], r_max))
    scores = coarse[:, r_lo : r_hi + 1].max(axis=1)
    cx0, cy0 = coarse_centers[int(np.argmax(scores))]

    pad = coarse_stride + 1
    fine_centers = _grid(cx0 - pad, cx0 + pad, cy0 - pad, cy0 + pad, 1)
    fine = _normalize(_vote_histograms(fine_centers, edges, r_max))
    window = fine[:, r_lo : r_hi + 1]
    if prefer_outer:
        smeared = window.copy()
        smeared[:, 1:] += window[:, :-1]
        smeared[:, :-1] += window[:, 1:]
        per_radius = smeared.max(axis=0)
        strong = np.nonzero(per_radius >= 0.6 * per_radius.max())[0]
        r_off = int(strong.max())
        m = int(np.argmax(smeared[:, r_off]))
        # the windowed score can crown an empty bin bordering the real
        # peak; settle on the strongest single bin among its neighbours
        lo = max(0, r_off - 1)
        hi = min(window.shape[1] - 1, r_off + 1)
        r_off = lo + int(np.argmax(window[m, lo : hi + 1]))
    else:
        m, r_off = np.unravel_index(np.argmax(window), window.shape)
        m, r_off = int(m), int(r_off)
    peak = float(window[m, r_off])
    cx, cy, r = _centroid_refine(fine_centers, fine, m, r_lo + r_off)
    return cx, cy, r, peak


def fit_boundaries(mask: MaskImage) -> IrisBoundaries:
    """Fit pupil and limbic circles to a segmentation mask.

    The mask's edge pixels vote into a (cx, cy, r) accumulator at 1-px
    resolution with radius-normalized counts.  The limbic circle comes from
    the peak over r in [30, 300]; the pupil circle from the peak over
    [8, 0.8 r_iris] with its center within 0.25 r_iris of the iris center.
    """
    if mask.on_count < MIN_MASK_ON_PIXELS:
        raise BoundaryFitError(
            f"insufficient edge support: {mask.on_count} on-pixels "
            f"(need >= {MIN_MASK_ON_PIXELS})"
        )
    edges = edge_pixels(mask.bits)
    if edges.shape[0] < MIN_EDGE_PIXELS:
        raise BoundaryFitError(
            f"insufficient edge support: {edges.shape[0]} edge pixels"
        )

    x0, y0 = edges.min(axis=0)
    x1, y1 = edges.max(axis=0)
    r_lo, r_hi = LIMBIC_RADIUS_RANGE
    icx, icy, ir, ipeak = _best_circle(edges, x0, x1, y0, y1, r_lo, r_hi,
                                       prefer_outer=True)
    if ipeak < PEAK_FRACTION:
        raise BoundaryFitError(
            f"no accumulator peak above {PEAK_FRACTION:.2f} of theoretical max votes "
            f"for the limbic boundary (best {ipeak:.3f})"
        )

    p_hi = int(PUPIL_MAX_RADIUS_FACTOR * ir)
    if p_hi <= PUPIL_MIN_RADIUS:
        raise BoundaryFitError(f"iris radius {ir:.1f} leaves no room for a pupil")
    reach = max(2, int(PUPIL_CENTER_FACTOR * ir))
    pcx, pcy, pr, ppeak = _best_circle(
        edges,
        int(icx) - reach, int(icx) + reach, int(icy) - reach, int(icy) + reach,
        PUPIL_MIN_RADIUS, p_hi, prefer_outer=False, coarse_stride=2,
    )
    if ppeak < PEAK_FRACTION:
        raise BoundaryFitError(
            f"no accumulator peak above {PEAK_FRACTION:.2f} of theoretical max votes "
            f"for the pupillary boundary (best {ppeak:.3f})"
        )
    if pr >= ir:
        raise BoundaryFitError(f"pupil radius {pr:.1f} not below iris radius {ir:.1f}")
    return IrisBoundaries(PixelPoint(pcx, pcy), pr, PixelPoint(icx, icy), ir)


# --------------------------------------------------------------------------
# Rubber-sheet normalization

def _sampling_grid(b: IrisBoundaries):
    """Sample points between the pupil and limbic boundary loci.

    Column j covers angle 2*pi*j/512 (zero at +x, increasing toward +y);
    row k sits at radial band center t = (k + 0.5)/64.  Non-concentric
    circles are handled by linear interpolation between the two boundary
    points at each angle.
    """
    theta = 2.0 * np.pi * np.arange(ANGULAR_SAMPLES) / ANGULAR_SAMPLES
    t = (np.arange(RADIAL_SAMPLES) + 0.5) / RADIAL_SAMPLES
    ct, st = np.cos(theta), np.sin(theta)
    px = b.pupil_center.x + b.pupil_radius * ct
    py = b.pupil_center.y + b.pupil_radius * st
    ix = b.iris_center.x + b.iris_radius * ct
    iy = b.iris_center.y + b.iris_radius * st
    xs = (1.0 - t)[:, None] * px[None, :] + t[:, None] * ix[None, :]
    ys = (1.0 - t)[:, None] * py[None, :] + t[:, None] * iy[None, :]
    return xs, ys


def check_within_image(image_w: int, image_h: int, b: IrisBoundaries):
    """Raise GeometryError unless the circles usefully overlap the image."""
    if not (0 <= b.pupil_center.x < image_w and 0 <= b.pupil_center.y < image_h):
        raise GeometryError("pupil center outside image")
    if (
        b.iris_center.x + b.iris_radius < 0
        or b.iris_center.x - b.iris_radius >= image_w
        or b.iris_center.y + b.iris_radius < 0
        or b.iris_center.y - b.iris_radius >= image_h
    ):
        raise GeometryError("iris circle entirely outside image")


def rubber_sheet(eye: EyeImage, b: IrisBoundaries) -> NormalizedIris:
    """Unroll the iris annulus to 512x64 with bilinear pixel sampling.

    Samples falling outside the image produce 0 and are expected to be
    masked off by the aligned NormalizedMask.
    """
    img = eye.pixels
    h, w = img.shape
    check_within_image(w, h, b)
    xs, ys = _sampling_grid(b)

    valid = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)
    cx = np.clip(xs, 0, w - 1)
    cy = np.clip(ys, 0, h - 1)
    x0 = np.floor(cx).astype(np.intp)
    y0 = np.floor(cy).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = cx - x0
    fy = cy - y0
    src = img.astype(np.float64)
    top = src[y0, x0] * (1 - fx) + src[y0, x1] * fx
    bot = src[y1, x0] * (1 - fx) + src[y1, x1] * fx
    values = top * (1 - fy) + bot * fy
    out = np.floor(values + 0.5).clip(0, 255).astype(np.uint8)
    out[~valid] = 0
    return NormalizedIris(out)


def rubber_sheet_mask(mask: MaskImage, b: IrisBoundaries) -> NormalizedMask:
    """Apply the same sampling grid to the mask with nearest-neighbour lookup."""
    bits = mask.bits
    h, w = bits.shape
    check_within_image(w, h, b)
    xs, ys = _sampling_grid(b)
    xi = np.rint(xs).astype(np.intp)
    yi = np.rint(ys).astype(np.intp)
    inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
    out = np.zeros(xs.shape, dtype=bool)
    out[inside] = bits[yi[inside], xi[inside]]
    return NormalizedMask(out)
