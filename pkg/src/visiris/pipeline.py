"""Stage runner: eye image in, masked iris template out, plus batch eval.

Each stage failure is wrapped in PipelineError carrying the stage name so
callers (CLI, eval harness) can report where a sample fell out.  Stage
order is fixed: segment, boundary fit, quality gate, normalize, encode.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple

from .errors import PipelineError, VisirisError
from .evaluation import (
    FAR_TARGETS,
    DatasetRecord,
    as_score_tuples,
    build_pairs,
    compute_roc,
    parse_manifest,
    score_pairs,
    split_reports,
    summarize_scores,
    write_roc_csv,
)
from .gabor import DEFAULT_WAVELENGTH, GaborBank, build_bank, encode
from .geometry import (
    MIN_MASK_ON_PIXELS,
    IrisBoundaries,
    NormalizedIris,
    NormalizedMask,
    fit_boundaries,
    rubber_sheet,
    rubber_sheet_mask,
)
from .imaging import EyeImage, MaskImage, load_gray, load_mask
from .matching import (
    DEFAULT_HD_THRESHOLD,
    DEFAULT_MAX_SHIFT,
    DEFAULT_MIN_OVERLAP_BITS,
    DecisionThreshold,
    apply_masks,
)
from .network import NetworkWeights, demo_weights, forward, read_weights
from .quality import GateResult, QualityReport, QualityThresholds, compute_metrics, gate
from .synth import mask_sidecar_path
from .template import IrisTemplate

STAGE_LOAD = "load"
STAGE_SEGMENT = "segment"
STAGE_BOUNDARY = "boundary-fit"
STAGE_QUALITY = "quality"
STAGE_NORMALIZE = "normalize"
STAGE_ENCODE = "encode"


@dataclass(frozen=True)
class PipelineConfig:
    """Everything the image-to-template path needs, in one place.

    ``weights_path`` of None selects the built-in demonstration weights,
    which segment the synthetic corpus without any training artifacts.
    """

    thresholds: QualityThresholds = field(default_factory=QualityThresholds)
    weights_path: Optional[str] = None
    wavelengths: Tuple[float, ...] = (DEFAULT_WAVELENGTH,)
    decision: DecisionThreshold = field(default_factory=DecisionThreshold)
    max_shift: int = DEFAULT_MAX_SHIFT

    def bank(self) -> GaborBank:
        return build_bank(self.wavelengths)


_WEIGHT_CACHE: Dict[Optional[str], NetworkWeights] = {}


def load_pipeline_weights(path: Optional[str]) -> NetworkWeights:
    """Weights for segmentation, cached per path; None means demo weights."""
    key = None if path is None else str(path)
    if key not in _WEIGHT_CACHE:
        _WEIGHT_CACHE[key] = demo_weights() if key is None else read_weights(key)
    return _WEIGHT_CACHE[key]


@dataclass(frozen=True)
class ProcessedEye:
    """All per-image artifacts; template fields are None when the gate failed."""

    eye: EyeImage
    mask: MaskImage
    bounds: IrisBoundaries
    report: QualityReport
    gate: GateResult
    iris: Optional[NormalizedIris]
    iris_mask: Optional[NormalizedMask]
    template: Optional[IrisTemplate]


def _stage(name: str, fn: Callable, *args):
    try:
        return fn(*args)
    except PipelineError:
        raise
    except VisirisError as e:
        raise PipelineError(name, str(e)) from e


def load_eye(path) -> EyeImage:
    """Load an eye crop from disk; wraps decode errors with the load stage."""

    def run():
        return EyeImage(load_gray(path))

    return _stage(STAGE_LOAD, run)


def segment_eye(eye: EyeImage, weights: NetworkWeights) -> MaskImage:
    def run():
        mask = forward(eye, weights).mask
        if mask.on_count < MIN_MASK_ON_PIXELS:
            raise PipelineError(
                STAGE_SEGMENT,
                f"segmentation produced {mask.on_count} on-pixels, "
                f"need at least {MIN_MASK_ON_PIXELS}",
            )
        return mask

    return _stage(STAGE_SEGMENT, run)


def process_eye(eye: EyeImage, cfg: PipelineConfig,
                mask: Optional[MaskImage] = None,
                enforce_gate: bool = True) -> ProcessedEye:
    """Run the full stage chain on one image.

    A precomputed ``mask`` skips the network.  When the quality gate fails
    and ``enforce_gate`` is set, the normalize/encode stages are skipped
    and the template fields come back None; the caller owns the refusal.
    """
    if mask is None:
        mask = segment_eye(eye, load_pipeline_weights(cfg.weights_path))
    bounds = _stage(STAGE_BOUNDARY, fit_boundaries, mask)
    report = _stage(STAGE_QUALITY, compute_metrics, eye, bounds, mask)
    verdict = gate(report, cfg.thresholds)
    if enforce_gate and not verdict.passed:
        return ProcessedEye(eye, mask, bounds, report, verdict, None, None, None)
    iris = _stage(STAGE_NORMALIZE, rubber_sheet, eye, bounds)
    iris_mask = _stage(STAGE_NORMALIZE, rubber_sheet_mask, mask, bounds)
    template = _stage(STAGE_ENCODE, encode, iris, iris_mask, cfg.bank())
    return ProcessedEye(eye, mask, bounds, report, verdict,
                        iris, iris_mask, apply_masks(template))


def gate_failure_message(verdict: GateResult) -> str:
    names = ", ".join(name for name, _, _ in verdict.failures)
    return f"quality gate failed: {names}"


# --------------------------------------------------------------------------
# Batch evaluation over a manifest


def record_image_path(record: DatasetRecord, manifest_path) -> Path:
    """Manifest paths are taken relative to the manifest's directory."""
    p = Path(record.template_path)
    return p if p.is_absolute() else Path(manifest_path).parent / p


def build_record_templates(records, manifest_path, cfg: PipelineConfig):
    """Image-to-template for every record; failures land in a reason map.

    A mask sidecar next to the image (``<stem>.mask.pgm``) substitutes for
    network segmentation when present, which keeps large batch runs off
    the forward pass.  Returns (templates keyed by record.key(), failures
    keyed likewise with string reasons).
    """
    templates: Dict[tuple, IrisTemplate] = {}
    failures: Dict[tuple, str] = {}
    for record in records:
        image_path = record_image_path(record, manifest_path)
        try:
            eye = load_eye(image_path)
            sidecar = mask_sidecar_path(image_path)
            mask = load_mask(sidecar) if sidecar.exists() else None
            done = process_eye(eye, cfg, mask=mask)
        except VisirisError as e:
            failures[record.key()] = str(e)
            continue
        if done.template is None:
            failures[record.key()] = gate_failure_message(done.gate)
            continue
        templates[record.key()] = done.template
    return templates, failures


def run_eval(manifest_path, protocol: str, seed: int, cfg: PipelineConfig,
             out_roc=None) -> dict:
    """Manifest to report dict: pair counts, TAR@FAR table, splits, exceptions.

    Records that fail the pipeline stay in the pairing universe; their
    pairs surface in the exceptions list rather than silently shrinking
    the protocol, mirroring failure-to-enroll accounting.
    """
    records, rejects = parse_manifest(manifest_path)
    templates, failures = build_record_templates(records, manifest_path, cfg)

    def lookup(record: DatasetRecord) -> IrisTemplate:
        key = record.key()
        if key in failures:
            raise PipelineError(STAGE_ENCODE, failures[key])
        return templates[key]

    pairs = build_pairs(records, protocol, seed)
    scored, exceptions = score_pairs(pairs, lookup, cfg.max_shift)
    tuples = as_score_tuples(scored)
    report = {
        "manifest": str(manifest_path),
        "protocol": protocol,
        "seed": seed,
        "record_count": len(records),
        "reject_count": len(rejects),
        "rejects": [
            {"line": line, "path": path, "reason": reason}
            for line, path, reason in rejects
        ],
        "template_failures": [
            {"record": "-".join(str(part) for part in key), "reason": reason}
            for key, reason in sorted(failures.items())
        ],
        "pair_counts": {
            "genuine": len(pairs.genuine),
            "imposter": len(pairs.imposter),
        },
        "exception_count": len(exceptions),
        "exceptions": [
            {"enroll": enroll, "verify": verify, "reason": reason}
            for enroll, verify, reason in exceptions
        ],
        "summary": summarize_scores(tuples),
        "splits": {
            "iris_color": split_reports(scored, lambda r: r.iris_color),
            "distance_cm": split_reports(scored, lambda r: r.capture_distance_cm),
        },
    }
    if out_roc is not None:
        write_roc_csv(out_roc, compute_roc(tuples))
    return report
