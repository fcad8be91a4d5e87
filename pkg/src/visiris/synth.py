"""Synthetic eye-image corpus for end-to-end evaluation without real data.

Each identity owns a band-limited random texture defined on the unrolled
polar grid (64 radial x 512 angular samples).  A sample renders that
texture into a concentric annulus in a 640x480 frame, so rotating the eye
is exactly a column shift of the texture, then applies mild blur and
sensor noise.  Ground-truth segmentation masks ship as sidecar files,
which lets the evaluation harness run the full geometry/coding/matching
pipeline deterministically.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from scipy.ndimage import gaussian_filter

from .geometry import ANGULAR_SAMPLES, RADIAL_SAMPLES
from .imaging import EYE_HEIGHT, EYE_WIDTH, GrayImage, MaskImage, save_gray, save_mask

PUPIL_GRAY = 10.0
SCLERA_GRAY = 235.0
IRIS_MEAN_GRAY = 120.0
TEXTURE_STD = 46.0
TEXTURE_CLIP = (52.0, 203.0)
ANGULAR_BAND = (8, 44)  # cycles per revolution kept in the texture
RADIAL_BAND = 10  # cycles across the 64 radial samples

MAX_ROTATION_COLUMNS = 4
NOISE_SIGMA = 4.0
MAX_BLUR_SIGMA = 1.0

MANIFEST_NAME = "manifest.csv"
MASK_SUFFIX = ".mask.pgm"

IRIS_COLORS = ("blue", "brown", "gray")


@dataclass(frozen=True)
class SampleTruth:
    """Generator-side ground truth for one rendered sample."""

    stem: str
    subject: str
    trial: int
    center: Tuple[float, float]
    pupil_radius: float
    iris_radius: float
    rotation_columns: int
    blur_sigma: float
    distance_cm: int
    iris_color: str


def identity_texture(rng: np.random.Generator) -> np.ndarray:
    """Band-limited polar texture (64 x 512), clipped to mid-gray levels.

    White noise is shaped in the 2-D Fourier domain: angular frequencies
    outside ANGULAR_BAND and radial frequencies above RADIAL_BAND are
    zeroed, which keeps the energy where the Gabor encoder and sharpness
    kernel operate.
    """
    noise = rng.normal(0.0, 1.0, (RADIAL_SAMPLES, ANGULAR_SAMPLES))
    spectrum = np.fft.fft2(noise)
    f_ang = np.abs(np.fft.fftfreq(ANGULAR_SAMPLES, d=1.0 / ANGULAR_SAMPLES))
    f_rad = np.abs(np.fft.fftfreq(RADIAL_SAMPLES, d=1.0 / RADIAL_SAMPLES))
    keep = (
        (f_ang[None, :] >= ANGULAR_BAND[0]) & (f_ang[None, :] <= ANGULAR_BAND[1])
        & (f_rad[:, None] <= RADIAL_BAND)
    )
    shaped = np.fft.ifft2(spectrum * keep).real
    shaped *= TEXTURE_STD / shaped.std()
    return np.clip(IRIS_MEAN_GRAY + shaped, *TEXTURE_CLIP)


def render_eye(texture: np.ndarray, rotation_columns: int, cx: float, cy: float,
               pupil_radius: float, iris_radius: float, blur_sigma: float,
               noise_sigma: float, rng: Optional[np.random.Generator] = None):
    """Render one eye frame plus its exact annulus mask.

    The polar texture is shifted by ``rotation_columns`` and mapped onto
    the annulus between the two concentric circles with bilinear lookup.
    """
    if texture.shape != (RADIAL_SAMPLES, ANGULAR_SAMPLES):
        raise ValueError(f"texture must be 64x512, got {texture.shape}")
    tex = np.roll(texture, rotation_columns, axis=1)
    yy, xx = np.mgrid[0:EYE_HEIGHT, 0:EYE_WIDTH].astype(np.float64)
    r = np.hypot(xx - cx, yy - cy)
    theta = np.mod(np.arctan2(yy - cy, xx - cx), 2.0 * np.pi)

    img = np.full((EYE_HEIGHT, EYE_WIDTH), SCLERA_GRAY)
    annulus = (r > pupil_radius) & (r <= iris_radius)
    t = (r[annulus] - pupil_radius) / (iris_radius - pupil_radius)
    row = np.clip(t * RADIAL_SAMPLES - 0.5, 0.0, RADIAL_SAMPLES - 1.0)
    col = theta[annulus] / (2.0 * np.pi) * ANGULAR_SAMPLES
    r0 = np.floor(row).astype(np.intp)
    r1 = np.minimum(r0 + 1, RADIAL_SAMPLES - 1)
    fr = row - r0
    c0 = np.floor(col).astype(np.intp) % ANGULAR_SAMPLES
    c1 = (c0 + 1) % ANGULAR_SAMPLES
    fc = col - np.floor(col)
    img[annulus] = (
        tex[r0, c0] * (1 - fr) * (1 - fc) + tex[r0, c1] * (1 - fr) * fc
        + tex[r1, c0] * fr * (1 - fc) + tex[r1, c1] * fr * fc
    )
    img[r <= pupil_radius] = PUPIL_GRAY

    if blur_sigma > 0.0:
        img = gaussian_filter(img, blur_sigma, mode="nearest")
    if noise_sigma > 0.0 and rng is not None:
        img = img + rng.normal(0.0, noise_sigma, img.shape)
    eye = GrayImage(np.clip(np.rint(img), 0, 255).astype(np.uint8))
    mask = MaskImage(annulus)
    return eye, mask


def generate_corpus(out_dir, identities: int = 20, samples: int = 4,
                    seed: int = 20240501) -> List[SampleTruth]:
    """Write the evaluation corpus: images, mask sidecars, and manifest.

    Returns the ground-truth records in manifest order.  Filenames follow
    the subject-eye-spoof-session-trial convention; the first two trials
    are tagged as 25 cm captures and the rest as 50 cm.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    truths: List[SampleTruth] = []
    rows = []
    for ident in range(1, identities + 1):
        subject = f"{ident:03d}"
        color = IRIS_COLORS[(ident - 1) % len(IRIS_COLORS)]
        texture = identity_texture(rng)
        for trial in range(1, samples + 1):
            iris_radius = float(rng.uniform(106.0, 114.0))
            pupil_radius = float(iris_radius * rng.uniform(0.40, 0.44))
            cx = float(320 + rng.integers(-6, 7))
            cy = float(240 + rng.integers(-6, 7))
            rotation = int(rng.integers(-MAX_ROTATION_COLUMNS,
                                        MAX_ROTATION_COLUMNS + 1))
            blur = float(rng.uniform(0.3, 0.85 * MAX_BLUR_SIGMA))
            eye, mask = render_eye(texture, rotation, cx, cy, pupil_radius,
                                   iris_radius, blur, NOISE_SIGMA, rng)
            stem = f"{subject}-left-none-1-{trial}"
            save_gray(eye, out / f"{stem}.pgm")
            save_mask(mask, out / f"{stem}{MASK_SUFFIX}")
            distance = 25 if trial <= samples // 2 else 50
            truths.append(SampleTruth(
                stem=stem, subject=subject, trial=trial, center=(cx, cy),
                pupil_radius=pupil_radius, iris_radius=iris_radius,
                rotation_columns=rotation, blur_sigma=blur,
                distance_cm=distance, iris_color=color,
            ))
            rows.append((f"{stem}.pgm", "VIS", str(distance), color))
    with open(out / MANIFEST_NAME, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["path", "spectrum", "distance_cm", "iris_color"])
        writer.writerows(rows)
    return truths


def mask_sidecar_path(image_path) -> Path:
    """`foo.pgm` -> `foo.mask.pgm` next to the image."""
    p = Path(image_path)
    return p.with_name(p.stem + MASK_SUFFIX)
