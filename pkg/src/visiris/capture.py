"""Capture-loop math: detection remapping, zoom/focus targeting and eye cropping.

The controller re-implements the mobile capture loop as a deterministic state
machine driven by detection streams (file replay or synthetic) instead of a
live camera.  Detections arrive in resized 416x416 frame coordinates and are
mapped back to sensor space before any zoom or focus decision.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .boxes import BoundingBox, PixelPoint
from .errors import GeometryError, ImageFormatError, SequencingError
from .imaging import EYE_HEIGHT, EYE_WIDTH, EyeImage, GrayImage, crop

RESIZED_WIDTH = 416
RESIZED_HEIGHT = 416


@dataclass(frozen=True)
class CoordinateMapper:
    """Scales detection coordinates from resized frames back to sensor frames."""

    w_original: int
    h_original: int
    w_resized: int = RESIZED_WIDTH
    h_resized: int = RESIZED_HEIGHT

    def __post_init__(self):
        for v in (self.w_original, self.h_original, self.w_resized, self.h_resized):
            if v < 1:
                raise GeometryError(f"mapper dimensions must be >= 1, got {v}")

    @property
    def scale_x(self) -> float:
        return self.w_original / self.w_resized

    @property
    def scale_y(self) -> float:
        return self.h_original / self.h_resized


def map_point(mapper: CoordinateMapper, p: PixelPoint) -> PixelPoint:
    """Map a resized-space point to sensor space by the two axis ratios."""
    if not (0.0 <= p.x <= mapper.w_resized and 0.0 <= p.y <= mapper.h_resized):
        raise GeometryError(
            f"point ({p.x}, {p.y}) outside resized frame "
            f"{mapper.w_resized}x{mapper.h_resized}"
        )
    return PixelPoint(p.x * mapper.scale_x, p.y * mapper.scale_y)


def map_box(mapper: CoordinateMapper, b: BoundingBox) -> BoundingBox:
    lo = map_point(mapper, PixelPoint(b.x_min, b.y_min))
    hi = map_point(mapper, PixelPoint(b.x_max, b.y_max))
    return BoundingBox(lo.x, lo.y, hi.x, hi.y)


@dataclass(frozen=True)
class DetectionFrame:
    """One detector output: optional eye and iris boxes in resized space."""

    frame_index: int
    eye_box: Optional[BoundingBox] = None
    iris_box: Optional[BoundingBox] = None
    confidence: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.confidence <= 1.0):
            raise GeometryError(f"confidence {self.confidence} outside [0, 1]")
        if self.iris_box is not None:
            if self.eye_box is None:
                raise GeometryError("iris box present without an eye box")
            if not self.eye_box.contains_box(self.iris_box, tolerance=1.0):
                raise GeometryError(
                    f"frame {self.frame_index}: iris box not inside eye box"
                )


@dataclass(frozen=True)
class ZoomCommand:
    """Requested zoom ratio relative to the current view."""

    zoom_factor: float
    target_width_bbox: float


@dataclass(frozen=True)
class FocusAt:
    point: PixelPoint  # sensor space


@dataclass(frozen=True)
class CropRequest:
    eye_box_sensor: BoundingBox


Command = Union[ZoomCommand, FocusAt, CropRequest]


def compute_zoom(eye_box_sensor: BoundingBox, target_width_bbox: float) -> ZoomCommand:
    """Ratio of the target box width to the detected box width, unclamped.

    Clamping to [1, max_zoom] happens when the command is applied to the
    controller state, so the raw ratio stays observable.
    """
    if target_width_bbox <= 0:
        raise GeometryError(f"target width must be positive, got {target_width_bbox}")
    if eye_box_sensor.width <= 0:
        raise GeometryError("eye box width must be positive")
    return ZoomCommand(target_width_bbox / eye_box_sensor.width, target_width_bbox)


def focus_target(iris_box_sensor: BoundingBox) -> PixelPoint:
    """Center of the iris box, the point autofocus should lock onto."""
    return iris_box_sensor.center


class Phase(enum.Enum):
    SEARCHING = "searching"
    ADJUSTING = "adjusting"
    SETTLING = "settling"
    CAPTURED = "captured"


@dataclass(frozen=True)
class ControllerConfig:
    mapper: CoordinateMapper
    target_width_bbox: float = 600.0
    max_zoom: float = 10.0
    zoom_deadband: float = 0.1
    settle_frames: int = 3

    def __post_init__(self):
        if self.target_width_bbox <= 0 or self.max_zoom < 1.0:
            raise GeometryError("invalid controller config: width/zoom out of range")
        if self.zoom_deadband <= 0 or self.settle_frames < 1:
            raise GeometryError("invalid controller config: deadband/settle out of range")


@dataclass(frozen=True)
class ControllerState:
    phase: Phase = Phase.SEARCHING
    current_zoom: float = 1.0
    focus_point: Optional[PixelPoint] = None
    settle_count: int = 0
    last_frame_index: int = -1


def step(
    state: ControllerState, frame: DetectionFrame, cfg: ControllerConfig
) -> tuple[ControllerState, list[Command]]:
    """Advance the capture state machine by one detection frame.

    Transitions follow Searching <-> Adjusting -> Settling -> Captured.  A
    detection frame whose raw zoom factor sits inside the deadband for
    ``settle_frames`` consecutive frames triggers the capture: the transition
    into Captured is the only place a CropRequest is emitted.  Captured states
    hold until :func:`quality_reject` sends the loop back to Adjusting.
    """
    if frame.frame_index <= state.last_frame_index:
        raise SequencingError(
            f"frame index {frame.frame_index} does not advance past "
            f"{state.last_frame_index}"
        )
    advanced = replace(state, last_frame_index=frame.frame_index)

    if state.phase is Phase.CAPTURED:
        # capture complete; the loop restarts only on an external quality fail
        return advanced, []

    if frame.eye_box is None:
        if state.phase is Phase.SETTLING:
            return replace(advanced, phase=Phase.ADJUSTING, settle_count=0), []
        return replace(advanced, phase=Phase.SEARCHING, settle_count=0), []

    eye_sensor = map_box(cfg.mapper, frame.eye_box)
    zoom_cmd = compute_zoom(eye_sensor, cfg.target_width_bbox)
    commands: list[Command] = [zoom_cmd]

    focus_point = state.focus_point
    if frame.iris_box is not None:
        focus_point = focus_target(map_box(cfg.mapper, frame.iris_box))
        commands.append(FocusAt(focus_point))

    new_zoom = min(cfg.max_zoom, max(1.0, state.current_zoom * zoom_cmd.zoom_factor))
    in_deadband = abs(zoom_cmd.zoom_factor - 1.0) <= cfg.zoom_deadband
    settle = state.settle_count + 1 if in_deadband else 0

    if settle >= cfg.settle_frames:
        phase = Phase.CAPTURED
        commands.append(CropRequest(eye_sensor))
    elif settle >= 1:
        phase = Phase.SETTLING
    else:
        phase = Phase.ADJUSTING

    new_state = ControllerState(
        phase=phase,
        current_zoom=new_zoom,
        focus_point=focus_point,
        settle_count=settle,
        last_frame_index=frame.frame_index,
    )
    return new_state, commands


def quality_reject(state: ControllerState) -> ControllerState:
    """Send a Captured controller back to Adjusting, keeping its zoom."""
    if state.phase is not Phase.CAPTURED:
        raise SequencingError(f"quality reject only applies to Captured, not {state.phase}")
    return replace(state, phase=Phase.ADJUSTING, settle_count=0)


# --------------------------------------------------------------------------
# Eye cropping

def resize_bilinear(pixels: np.ndarray, out_w: int, out_h: int) -> np.ndarray:
    """Bilinear resample with half-pixel-center alignment.

    Equal input and output extents reduce to an exact copy.  Values round
    half-up to uint8.
    """
    src = pixels.astype(np.float64)
    h, w = src.shape
    sx = w / out_w
    sy = h / out_h
    xs = np.clip((np.arange(out_w) + 0.5) * sx - 0.5, 0.0, w - 1.0)
    ys = np.clip((np.arange(out_h) + 0.5) * sy - 0.5, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xs - x0
    fy = ys - y0

    top = src[y0[:, None], x0[None, :]] * (1 - fx) + src[y0[:, None], x1[None, :]] * fx
    bot = src[y1[:, None], x0[None, :]] * (1 - fx) + src[y1[:, None], x1[None, :]] * fx
    out = top * (1 - fy)[:, None] + bot * fy[:, None]
    return np.floor(out + 0.5).clip(0, 255).astype(np.uint8)


def crop_eye(frame_image: GrayImage, eye_box_sensor: BoundingBox) -> EyeImage:
    """Crop the sensor-space eye box and resample it to exactly 640x480."""
    cropped = crop(frame_image, eye_box_sensor)
    resized = resize_bilinear(cropped.pixels, EYE_WIDTH, EYE_HEIGHT)
    return EyeImage(GrayImage(resized))


# --------------------------------------------------------------------------
# Detection sidecar files

SIDECAR_FIELDS = 10


def _parse_box(tokens: Sequence[str], what: str, line_no: int) -> Optional[BoundingBox]:
    if all(t == "-" for t in tokens):
        return None
    if any(t == "-" for t in tokens):
        raise ImageFormatError(f"line {line_no}: partial {what} box {tokens}")
    try:
        x0, y0, x1, y1 = (float(t) for t in tokens)
    except ValueError:
        raise ImageFormatError(f"line {line_no}: non-numeric {what} box {tokens}") from None
    return BoundingBox(x0, y0, x1, y1)


def parse_detections(path) -> list[DetectionFrame]:
    """Read a detection sidecar: one frame per line, '-' for missing boxes."""
    frames = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if len(tokens) != SIDECAR_FIELDS:
                raise ImageFormatError(
                    f"line {line_no}: expected {SIDECAR_FIELDS} fields, got {len(tokens)}"
                )
            try:
                idx = int(tokens[0])
                conf = float(tokens[9])
            except ValueError:
                raise ImageFormatError(f"line {line_no}: bad index/confidence") from None
            eye = _parse_box(tokens[1:5], "eye", line_no)
            iris = _parse_box(tokens[5:9], "iris", line_no)
            frames.append(DetectionFrame(idx, eye, iris, conf))
    return frames


def format_detection(frame: DetectionFrame) -> str:
    def box_tokens(b: Optional[BoundingBox]) -> list[str]:
        if b is None:
            return ["-", "-", "-", "-"]
        return [f"{v:g}" for v in (b.x_min, b.y_min, b.x_max, b.y_max)]

    parts = [str(frame.frame_index)]
    parts += box_tokens(frame.eye_box)
    parts += box_tokens(frame.iris_box)
    parts.append(f"{frame.confidence:g}")
    return " ".join(parts)


def write_detections(frames: Iterable[DetectionFrame], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for fr in frames:
            f.write(format_detection(fr) + "\n")


# --------------------------------------------------------------------------
# Replay and tracing

@dataclass(frozen=True)
class TraceRow:
    frame_index: int
    phase: Phase
    zoom: float
    settle_count: int
    commands: tuple[Command, ...] = field(default_factory=tuple)

    def format(self) -> str:
        return ",".join(
            [
                str(self.frame_index),
                self.phase.value,
                f"{self.zoom:.6f}",
                str(self.settle_count),
                format_commands(self.commands),
            ]
        )


def format_commands(commands: Sequence[Command]) -> str:
    parts = []
    for c in commands:
        if isinstance(c, ZoomCommand):
            parts.append(f"zoom={c.zoom_factor:.6f}")
        elif isinstance(c, FocusAt):
            parts.append(f"focus={c.point.x:.6f}:{c.point.y:.6f}")
        elif isinstance(c, CropRequest):
            b = c.eye_box_sensor
            parts.append(f"crop={b.x_min:.6f}:{b.y_min:.6f}:{b.x_max:.6f}:{b.y_max:.6f}")
        else:  # pragma: no cover
            raise TypeError(f"unknown command {c!r}")
    return ";".join(parts)


TRACE_HEADER = "frame_index,phase,zoom,settle,commands"


def replay(
    frames: Iterable[DetectionFrame],
    cfg: ControllerConfig,
    state: Optional[ControllerState] = None,
) -> tuple[ControllerState, list[TraceRow]]:
    """Run the controller over a detection stream, producing a per-frame trace."""
    st = state if state is not None else ControllerState()
    rows = []
    for frame in frames:
        st, commands = step(st, frame, cfg)
        rows.append(
            TraceRow(frame.frame_index, st.phase, st.current_zoom, st.settle_count,
                     tuple(commands))
        )
    return st, rows
