"""Visible-spectrum iris recognition toolkit.

The processing chain: capture-loop math (:mod:`visiris.capture`), quality
gating (:mod:`visiris.quality`), segmentation inference
(:mod:`visiris.network`), boundary fitting and rubber-sheet unwrapping
(:mod:`visiris.geometry`), phase coding (:mod:`visiris.gabor`), masked
Hamming-distance matching (:mod:`visiris.matching`), and a synthetic-data
evaluation harness (:mod:`visiris.synth`, :mod:`visiris.evaluation`).
High-level orchestration lives in :mod:`visiris.pipeline`; the ``visiris``
console script in :mod:`visiris.cli` exposes every stage.
"""

from .errors import (
    BoundaryFitError,
    ConfigError,
    GalleryError,
    GeometryError,
    ImageFormatError,
    NoOverlapError,
    PipelineError,
    ProtocolError,
    QualityGateError,
    SequencingError,
    ShapeError,
    TemplateFormatError,
    VisirisError,
    WeightFormatError,
)
from .imaging import (
    EYE_HEIGHT,
    EYE_WIDTH,
    EyeImage,
    GrayImage,
    MaskImage,
    RgbImage,
    extract_red_channel,
    load_gray,
    load_mask,
    save_gray,
    save_mask,
)
from .geometry import (
    IrisBoundaries,
    NormalizedIris,
    NormalizedMask,
    fit_boundaries,
    rubber_sheet,
    rubber_sheet_mask,
)
from .quality import (
    GateResult,
    QualityReport,
    QualityThresholds,
    compute_metrics,
    fft_sharpness,
    gate,
    laplacian_sharpness,
)
from .gabor import GaborBank, GaborFilter, build_bank, encode
from .template import IrisTemplate, load_template, rotate_template, save_template
from .matching import (
    DecisionThreshold,
    MatchResult,
    apply_masks,
    decide,
    masked_hd,
    match_shifted,
)
from .pipeline import PipelineConfig, ProcessedEye, process_eye, run_eval
from .gallery import Gallery, GalleryEntry, enroll_image, verify_image

__version__ = "0.1.0"

__all__ = [
    "BoundaryFitError",
    "ConfigError",
    "DecisionThreshold",
    "EYE_HEIGHT",
    "EYE_WIDTH",
    "EyeImage",
    "GaborBank",
    "GaborFilter",
    "Gallery",
    "GalleryEntry",
    "GalleryError",
    "GateResult",
    "GeometryError",
    "GrayImage",
    "ImageFormatError",
    "IrisBoundaries",
    "IrisTemplate",
    "MaskImage",
    "MatchResult",
    "NoOverlapError",
    "NormalizedIris",
    "NormalizedMask",
    "PipelineConfig",
    "PipelineError",
    "ProcessedEye",
    "ProtocolError",
    "QualityGateError",
    "QualityReport",
    "QualityThresholds",
    "RgbImage",
    "SequencingError",
    "ShapeError",
    "TemplateFormatError",
    "VisirisError",
    "WeightFormatError",
    "apply_masks",
    "build_bank",
    "compute_metrics",
    "decide",
    "encode",
    "enroll_image",
    "extract_red_channel",
    "fft_sharpness",
    "fit_boundaries",
    "gate",
    "laplacian_sharpness",
    "load_gray",
    "load_mask",
    "load_template",
    "masked_hd",
    "match_shifted",
    "process_eye",
    "rotate_template",
    "rubber_sheet",
    "rubber_sheet_mask",
    "run_eval",
    "save_gray",
    "save_mask",
    "save_template",
    "verify_image",
]
