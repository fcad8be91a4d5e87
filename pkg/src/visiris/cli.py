"""Command-line front end: one subcommand per pipeline stage plus stores.

Every subcommand accepts ``--config <toml>`` (overrides the embedded
defaults; see ``visiris config --dump``) and ``--json`` for
machine-readable stdout.  Exit codes: 0 success or accept, 2 quality-gate
failure or match reject, 1 any other error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import capture
from .config import config_to_toml, load_config, load_thresholds
from .errors import PipelineError, QualityGateError, VisirisError
from .gallery import Gallery, enroll_image, verify_image
from .geometry import (
    NormalizedIris,
    NormalizedMask,
    fit_boundaries,
    load_bounds,
    rubber_sheet,
    rubber_sheet_mask,
    save_bounds,
)
from .imaging import GrayImage, load_gray, load_mask, save_gray, save_mask
from .matching import DecisionThreshold, decide, match_shifted
from .network import forward, param_count, read_weights, topology_summary
from .pipeline import (
    PipelineConfig,
    load_eye,
    load_pipeline_weights,
    run_eval,
    segment_eye,
)
from .quality import compute_metrics, gate
from .synth import generate_corpus
from .template import load_template, save_template
from .evaluation import PROTOCOLS

PROG = "visiris"


def _emit(args, payload: dict, human: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(human)


def _load_config_arg(args) -> PipelineConfig:
    if getattr(args, "config", None):
        return load_config(args.config)
    return PipelineConfig()


# --------------------------------------------------------------------------
# Stage subcommands


def cmd_quality(args, cfg: PipelineConfig) -> int:
    eye = load_eye(args.eye)
    mask = load_mask(args.mask)
    bounds = load_bounds(args.bounds)
    thresholds = load_thresholds(args.thresholds) if args.thresholds else cfg.thresholds
    report = compute_metrics(eye, bounds, mask)
    verdict = gate(report, thresholds)
    payload = {"report": report.to_json_dict(), "gate": verdict.to_json_dict()}
    if verdict.passed:
        _emit(args, payload, f"quality gate passed (overall {report.overall_quality:.2f})")
        return 0
    names = ", ".join(name for name, _, _ in verdict.failures)
    _emit(args, payload, f"quality gate FAILED: {names}")
    return 2


def cmd_segment(args, cfg: PipelineConfig) -> int:
    eye = load_eye(args.eye)
    weights = read_weights(args.weights) if args.weights else load_pipeline_weights(
        cfg.weights_path)
    out = forward(eye, weights)
    save_mask(out.mask, args.out_mask)
    if args.out_prob:
        prob = np.floor(out.probabilities * 255.0 + 0.5).astype(np.uint8)
        save_gray(GrayImage(prob), args.out_prob)
    payload = {
        "out_mask": str(args.out_mask),
        "out_prob": str(args.out_prob) if args.out_prob else None,
        "on_pixels": out.mask.on_count,
    }
    _emit(args, payload, f"wrote {args.out_mask} ({out.mask.on_count} on-pixels)")
    return 0


def cmd_normalize(args, cfg: PipelineConfig) -> int:
    eye = load_eye(args.eye)
    mask = load_mask(args.mask)
    bounds = fit_boundaries(mask)
    iris = rubber_sheet(eye, bounds)
    iris_mask = rubber_sheet_mask(mask, bounds)
    save_gray(iris.to_gray(), args.out_iris)
    save_mask(iris_mask.to_mask_image(), args.out_mask)
    if args.bounds_out:
        save_bounds(bounds, args.bounds_out)
    payload = {
        "out_iris": str(args.out_iris),
        "out_mask": str(args.out_mask),
        "bounds": bounds.to_json_dict(),
    }
    _emit(
        args, payload,
        f"wrote {args.out_iris}; pupil r={bounds.pupil_radius:.1f} "
        f"iris r={bounds.iris_radius:.1f}",
    )
    return 0


def cmd_encode(args, cfg: PipelineConfig) -> int:
    from .gabor import encode as encode_iris

    iris_img = load_gray(args.iris)
    mask_img = load_mask(args.mask)
    iris = NormalizedIris(iris_img.pixels)
    mask = NormalizedMask(mask_img.bits)
    template = encode_iris(iris, mask, cfg.bank())
    save_template(template, args.out)
    valid = int(template.mask_bits().sum())
    payload = {"out": str(args.out), "planes": template.planes, "valid_bits": valid}
    _emit(args, payload, f"wrote {args.out} ({template.planes} planes, {valid} valid bits)")
    return 0


def cmd_match(args, cfg: PipelineConfig) -> int:
    probe = load_template(args.probe)
    gallery = load_template(args.gallery)
    max_shift = cfg.max_shift if args.max_shift is None else args.max_shift
    threshold = DecisionThreshold(
        cfg.decision.hd_threshold if args.threshold is None else args.threshold,
        cfg.decision.min_overlap_bits,
    )
    result = match_shifted(probe, gallery, max_shift)
    accepted = decide(result, threshold)
    payload = {"match": result.to_json_dict(), "accepted": accepted}
    _emit(
        args, payload,
        f"hd={result.hd:.4f} shift={result.best_shift} "
        f"overlap={result.overlap_bits} -> {'ACCEPT' if accepted else 'REJECT'}",
    )
    return 0 if accepted else 2


# --------------------------------------------------------------------------
# Gallery subcommands


def _gate_payload(e: QualityGateError) -> dict:
    return {
        "error": str(e),
        "failures": [
            {"metric": n, "value": v, "threshold": t} for n, v, t in e.failures
        ],
    }


def cmd_enroll(args, cfg: PipelineConfig) -> int:
    eye = load_eye(args.image)
    mask = load_mask(args.mask) if args.mask else None
    gallery = Gallery(args.gallery)
    try:
        entry, done = enroll_image(
            gallery, eye, args.subject, args.eye_side, cfg,
            mask=mask, replace=args.replace,
        )
    except QualityGateError as e:
        _emit(args, _gate_payload(e), f"enrollment refused: {e}")
        return 2
    payload = {"entry": entry.to_json_dict(), "gallery": str(args.gallery)}
    _emit(
        args, payload,
        f"enrolled {entry.subject_id} ({entry.eye}) -> {entry.template_path}",
    )
    return 0


def cmd_verify(args, cfg: PipelineConfig) -> int:
    eye = load_eye(args.image)
    mask = load_mask(args.mask) if args.mask else None
    gallery = Gallery(args.gallery)
    try:
        accepted, result, entry, done = verify_image(
            gallery, eye, args.subject, args.eye_side, cfg, mask=mask,
        )
    except QualityGateError as e:
        _emit(args, _gate_payload(e), f"verification refused: {e}")
        return 2
    payload = {
        "subject": entry.subject_id,
        "eye": entry.eye,
        "match": result.to_json_dict(),
        "accepted": accepted,
    }
    _emit(
        args, payload,
        f"{entry.subject_id} ({entry.eye}): hd={result.hd:.4f} "
        f"shift={result.best_shift} -> {'ACCEPT' if accepted else 'REJECT'}",
    )
    return 0 if accepted else 2


# --------------------------------------------------------------------------
# Batch / tooling subcommands


def cmd_eval(args, cfg: PipelineConfig) -> int:
    report = run_eval(args.manifest, args.protocol, args.seed, cfg,
                      out_roc=args.out_roc)
    with open(args.out_report, "w", encoding="utf-8") as f:
        json.dump(report, f, indent=2)
        f.write("\n")
    summary = report["summary"]
    lines = [
        f"protocol {report['protocol']}, seed {report['seed']}: "
        f"{summary['genuine_count']} genuine / {summary['imposter_count']} imposter scores",
        f"exceptions: {report['exception_count']}",
    ]
    if summary["mean_genuine_hd"] is not None:
        lines.append(f"mean hd: genuine {summary['mean_genuine_hd']:.4f}, "
                     f"imposter {summary['mean_imposter_hd']:.4f}")
    if summary["tar_at_far"]:
        for far, tar in summary["tar_at_far"].items():
            lines.append(f"TAR@FAR<={far}: {tar:.4f}")
    _emit(args, report, "\n".join(lines))
    return 0


def cmd_netinfo(args, cfg: PipelineConfig) -> int:
    weights = read_weights(args.weights) if args.weights else load_pipeline_weights(
        cfg.weights_path)
    payload = {
        "stages": weights.stage_count,
        "encoder_channels": list(weights.encoder_channels),
        "parameters": param_count(weights),
    }
    _emit(args, payload, topology_summary(weights))
    return 0


def cmd_synth(args, cfg: PipelineConfig) -> int:
    truths = generate_corpus(args.out, identities=args.identities,
                             samples=args.samples, seed=args.seed)
    payload = {
        "out": str(args.out),
        "images": len(truths),
        "identities": args.identities,
        "samples": args.samples,
        "seed": args.seed,
        "manifest": str(Path(args.out) / "manifest.csv"),
    }
    _emit(
        args, payload,
        f"wrote {len(truths)} images ({args.identities} identities x "
        f"{args.samples} samples) under {args.out}",
    )
    return 0


def cmd_config(args, cfg: PipelineConfig) -> int:
    # --dump prints the effective config (defaults merged with --config)
    text = config_to_toml(cfg)
    if args.json:
        print(json.dumps({"toml": text}, indent=2))
    else:
        print(text, end="")
    return 0


_FRAME_PATTERNS = ("frame_{i:04d}.pgm", "frame_{i}.pgm", "{i}.pgm",
                   "frame_{i:04d}.png", "frame_{i}.png", "{i}.png")


def _frame_file(frames_dir: Path, index: int):
    for pattern in _FRAME_PATTERNS:
        p = frames_dir / pattern.format(i=index)
        if p.is_file():
            return p
    return None


def cmd_capture_sim(args, cfg: PipelineConfig) -> int:
    frames_dir = Path(args.frames)
    detections = capture.parse_detections(args.detections)
    if not detections:
        raise PipelineError("capture", f"no detection frames in {args.detections}")

    first = None
    for det in detections:
        first = _frame_file(frames_dir, det.frame_index)
        if first is not None:
            break
    if first is None:
        raise PipelineError(
            "capture",
            f"no frame images under {frames_dir} matching the detection indices "
            "(expected names like frame_0001.pgm)",
        )
    sensor = load_gray(first)
    mapper = capture.CoordinateMapper(sensor.width, sensor.height)
    ctl = capture.ControllerConfig(mapper=mapper)
    state, rows = capture.replay(detections, ctl)

    with open(args.trace, "w", encoding="utf-8") as f:
        f.write(capture.TRACE_HEADER + "\n")
        for row in rows:
            f.write(row.format() + "\n")

    crop_row = next(
        (r for r in reversed(rows)
         if any(isinstance(c, capture.CropRequest) for c in r.commands)),
        None,
    )
    payload = {
        "frames": len(rows),
        "final_phase": state.phase.value,
        "zoom": state.current_zoom,
        "trace": str(args.trace),
        "out": None,
    }
    if crop_row is None:
        _emit(args, payload,
              f"capture loop ended in phase {state.phase.value}; no eye captured")
        return 2
    crop_req = next(c for c in crop_row.commands
                    if isinstance(c, capture.CropRequest))
    frame_path = _frame_file(frames_dir, crop_row.frame_index)
    if frame_path is None:
        raise PipelineError(
            "capture", f"frame image for captured index {crop_row.frame_index} missing"
        )
    eye = capture.crop_eye(load_gray(frame_path), crop_req.eye_box_sensor)
    save_gray(eye.image, args.out)
    payload["out"] = str(args.out)
    _emit(args, payload,
          f"captured at frame {crop_row.frame_index}; wrote {args.out}")
    return 0


# --------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--json", action="store_true",
                        help="emit machine-readable JSON on stdout")
    common.add_argument("--config", metavar="TOML",
                        help="config file overriding embedded defaults")

    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Visible-spectrum iris recognition toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("quality", parents=[common],
                       help="score an eye image against the quality gate")
    p.add_argument("--eye", required=True, help="640x480 eye image (PGM/PNG)")
    p.add_argument("--mask", required=True, help="iris mask (PGM, values 0/255)")
    p.add_argument("--bounds", required=True, help="boundary circles JSON")
    p.add_argument("--thresholds", help="TOML file of gate thresholds")
    p.set_defaults(func=cmd_quality)

    p = sub.add_parser("segment", parents=[common],
                       help="run the segmentation network on an eye image")
    p.add_argument("--eye", required=True)
    p.add_argument("--weights", help="GAUW weight file (default: built-in demo)")
    p.add_argument("--out-mask", required=True)
    p.add_argument("--out-prob", help="also write the probability map as a PGM")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("normalize", parents=[common],
                       help="fit boundaries and unwrap the iris to 512x64")
    p.add_argument("--eye", required=True)
    p.add_argument("--mask", required=True)
    p.add_argument("--out-iris", required=True)
    p.add_argument("--out-mask", required=True)
    p.add_argument("--bounds-out", help="write fitted boundary circles JSON")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("encode", parents=[common],
                       help="encode a normalized iris into a binary template")
    p.add_argument("--iris", required=True, help="512x64 unwrapped iris PGM")
    p.add_argument("--mask", required=True, help="512x64 unwrapped mask PGM")
    p.add_argument("--out", required=True, help="output template (.irt)")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("match", parents=[common],
                       help="compare two templates")
    p.add_argument("--probe", required=True)
    p.add_argument("--gallery", required=True)
    p.add_argument("--max-shift", type=int, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("enroll", parents=[common],
                       help="run the pipeline and store the template")
    p.add_argument("--gallery", required=True, help="gallery directory")
    p.add_argument("--image", required=True)
    p.add_argument("--subject", required=True)
    p.add_argument("--eye-side", required=True, choices=["left", "right"])
    p.add_argument("--mask", help="precomputed mask (skips the network)")
    p.add_argument("--replace", action="store_true")
    p.set_defaults(func=cmd_enroll)

    p = sub.add_parser("verify", parents=[common],
                       help="run the pipeline and match against a stored template")
    p.add_argument("--gallery", required=True)
    p.add_argument("--image", required=True)
    p.add_argument("--subject", required=True)
    p.add_argument("--eye-side", required=True, choices=["left", "right"])
    p.add_argument("--mask", help="precomputed mask (skips the network)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("eval", parents=[common],
                       help="batch evaluation over a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--protocol", required=True, choices=list(PROTOCOLS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-roc", required=True)
    p.add_argument("--out-report", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("capture-sim", parents=[common],
                       help="replay a detection stream through the capture loop")
    p.add_argument("--frames", required=True,
                   help="directory of sensor frames (frame_0001.pgm, ...)")
    p.add_argument("--detections", required=True, help="detection sidecar file")
    p.add_argument("--out", required=True, help="captured 640x480 eye image")
    p.add_argument("--trace", required=True, help="per-frame state/command CSV")
    p.set_defaults(func=cmd_capture_sim)

    p = sub.add_parser("netinfo", parents=[common],
                       help="print network topology and parameter count")
    p.add_argument("--weights", help="GAUW weight file (default: built-in demo)")
    p.set_defaults(func=cmd_netinfo)

    p = sub.add_parser("synth", parents=[common],
                       help="generate a synthetic eye corpus with ground truth")
    p.add_argument("--out", required=True)
    p.add_argument("--identities", type=int, default=20)
    p.add_argument("--samples", type=int, default=4)
    p.add_argument("--seed", type=int, default=20240501)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("config", parents=[common],
                       help="print the effective configuration as TOML")
    p.add_argument("--dump", action="store_true",
                   help="print the configuration (default action)")
    p.set_defaults(func=cmd_config)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config_arg(args)
        return args.func(args, cfg)
    except VisirisError as e:
        if getattr(args, "json", False):
            print(json.dumps({"error": str(e)}, indent=2))
        else:
            print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
