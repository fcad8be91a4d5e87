"""Capture controller: mapping math, state machine, golden trace, sidecars."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from visiris import capture
from visiris.boxes import BoundingBox, PixelPoint
from visiris.errors import GeometryError, ImageFormatError, SequencingError
from visiris.imaging import GrayImage

MAPPER_2X = capture.CoordinateMapper(832, 832)


finite_coord = st.floats(0.0, 416.0, allow_nan=False, allow_infinity=False)


class TestCoordinateMapping:
    def test_scale_factors(self):
        m = capture.CoordinateMapper(1920, 1080)
        assert m.scale_x == pytest.approx(1920 / 416)
        assert m.scale_y == pytest.approx(1080 / 416)

    @settings(max_examples=1000, deadline=None)
    @given(x=finite_coord, y=finite_coord)
    def test_identity_mapping(self, x, y):
        # original extents equal to the resized extents: mapping is a no-op
        m = capture.CoordinateMapper(416, 416)
        p = capture.map_point(m, PixelPoint(x, y))
        assert p.x == x and p.y == y

    @settings(max_examples=1000, deadline=None)
    @given(
        x=finite_coord, y=finite_coord,
        sx=st.integers(417, 4096), sy=st.integers(417, 4096),
        k=st.floats(0.1, 1.0),
    )
    def test_linearity(self, x, y, sx, sy, k):
        # f(k p) = k f(p) for points scaled toward the origin
        m = capture.CoordinateMapper(sx, sy)
        p = capture.map_point(m, PixelPoint(x, y))
        q = capture.map_point(m, PixelPoint(k * x, k * y))
        assert q.x == pytest.approx(k * p.x, abs=1e-9)
        assert q.y == pytest.approx(k * p.y, abs=1e-9)

    def test_out_of_frame_rejected(self):
        with pytest.raises(GeometryError, match="outside"):
            capture.map_point(MAPPER_2X, PixelPoint(420.0, 10.0))

    def test_box_mapping_scales_both_corners(self):
        b = capture.map_box(MAPPER_2X, BoundingBox(10, 20, 30, 40))
        assert (b.x_min, b.y_min, b.x_max, b.y_max) == (20, 40, 60, 80)


class TestZoomAndFocus:
    def test_zoom_is_raw_width_ratio(self):
        cmd = capture.compute_zoom(BoundingBox(0, 0, 300, 300), 600.0)
        assert cmd.zoom_factor == 2.0

    def test_zoom_needs_positive_target(self):
        with pytest.raises(GeometryError):
            capture.compute_zoom(BoundingBox(0, 0, 300, 300), 0.0)

    def test_focus_is_iris_center(self):
        assert capture.focus_target(BoundingBox(10, 10, 30, 50)) == PixelPoint(20, 30)


def _stream():
    eye2 = BoundingBox(100, 100, 250, 250)
    iris2 = BoundingBox(150, 150, 200, 200)
    eye = BoundingBox(30, 30, 320, 320)
    iris = BoundingBox(150, 150, 250, 250)
    return [
        capture.DetectionFrame(1),
        capture.DetectionFrame(2, eye2, iris2, 0.9),
        capture.DetectionFrame(3, eye, iris, 0.95),
        capture.DetectionFrame(4, eye, iris, 0.95),
        capture.DetectionFrame(5, eye, iris, 0.95),
    ]


# Derivation: scale 2x maps the frame-2 box to sensor width 300 so the zoom
# ratio is 600/300 = 2; frames 3-5 map to width 580, ratio 600/580, inside
# the 0.1 deadband, so the settle counter runs 1, 2, 3 and the third frame
# captures with a crop of the sensor-space eye box.
GOLDEN_TRACE = [
    "1,searching,1.000000,0,",
    "2,adjusting,2.000000,0,zoom=2.000000;focus=350.000000:350.000000",
    "3,settling,2.068966,1,zoom=1.034483;focus=400.000000:400.000000",
    "4,settling,2.140309,2,zoom=1.034483;focus=400.000000:400.000000",
    "5,captured,2.214113,3,zoom=1.034483;focus=400.000000:400.000000;"
    "crop=60.000000:60.000000:640.000000:640.000000",
]


class TestControllerReplay:
    def test_golden_trace(self):
        cfg = capture.ControllerConfig(mapper=MAPPER_2X)
        state, rows = capture.replay(_stream(), cfg)
        assert [r.format() for r in rows] == GOLDEN_TRACE
        assert state.phase is capture.Phase.CAPTURED

    def test_golden_zoom_matches_closed_form(self):
        cfg = capture.ControllerConfig(mapper=MAPPER_2X)
        state, _ = capture.replay(_stream(), cfg)
        assert state.current_zoom == pytest.approx(2.0 * (600 / 580) ** 3)

    def test_lost_detection_resets_settling(self):
        frames = _stream()[:4] + [capture.DetectionFrame(6)]
        cfg = capture.ControllerConfig(mapper=MAPPER_2X)
        state, rows = capture.replay(frames, cfg)
        assert state.phase is capture.Phase.ADJUSTING
        assert state.settle_count == 0

    def test_captured_holds_until_quality_reject(self):
        cfg = capture.ControllerConfig(mapper=MAPPER_2X)
        state, _ = capture.replay(_stream(), cfg)
        held, commands = capture.step(
            state, capture.DetectionFrame(9, BoundingBox(0, 0, 10, 10)), cfg
        )
        assert held.phase is capture.Phase.CAPTURED and commands == []
        back = capture.quality_reject(held)
        assert back.phase is capture.Phase.ADJUSTING
        assert back.current_zoom == held.current_zoom

    def test_quality_reject_requires_captured(self):
        with pytest.raises(SequencingError):
            capture.quality_reject(capture.ControllerState())

    def test_frame_indices_must_advance(self):
        cfg = capture.ControllerConfig(mapper=MAPPER_2X)
        state, _ = capture.step(capture.ControllerState(),
                                capture.DetectionFrame(5), cfg)
        with pytest.raises(SequencingError):
            capture.step(state, capture.DetectionFrame(5), cfg)

    def test_zoom_clamped_to_max(self):
        cfg = capture.ControllerConfig(mapper=MAPPER_2X, max_zoom=3.0)
        tiny = BoundingBox(0, 0, 10, 10)  # sensor width 20 -> ratio 30
        state, _ = capture.step(capture.ControllerState(),
                                capture.DetectionFrame(1, tiny), cfg)
        assert state.current_zoom == 3.0


class TestDetectionSidecar:
    def test_round_trip(self, tmp_path):
        frames = _stream()
        capture.write_detections(frames, tmp_path / "d.txt")
        assert capture.parse_detections(tmp_path / "d.txt") == frames

    def test_missing_boxes_use_dashes(self):
        line = capture.format_detection(capture.DetectionFrame(4))
        assert line == "4 - - - - - - - - 0"

    def test_partial_box_rejected(self, tmp_path):
        (tmp_path / "d.txt").write_text("1 10 10 - 20 - - - - 0.5\n")
        with pytest.raises(ImageFormatError, match="partial"):
            capture.parse_detections(tmp_path / "d.txt")

    def test_comments_and_blanks_skipped(self, tmp_path):
        (tmp_path / "d.txt").write_text("# header\n\n1 - - - - - - - - 0\n")
        assert len(capture.parse_detections(tmp_path / "d.txt")) == 1

    def test_wrong_field_count(self, tmp_path):
        (tmp_path / "d.txt").write_text("1 2 3\n")
        with pytest.raises(ImageFormatError, match="fields"):
            capture.parse_detections(tmp_path / "d.txt")

    def test_iris_outside_eye_rejected(self):
        with pytest.raises(GeometryError, match="iris box"):
            capture.DetectionFrame(
                1, BoundingBox(0, 0, 50, 50), BoundingBox(100, 100, 200, 200)
            )


class TestEyeCrop:
    def test_resize_identity(self):
        pixels = np.random.default_rng(2).integers(0, 256, (33, 21), dtype=np.uint8)
        assert np.array_equal(capture.resize_bilinear(pixels, 21, 33), pixels)

    def test_resize_constant_stays_constant(self):
        pixels = np.full((50, 60), 137, dtype=np.uint8)
        out = capture.resize_bilinear(pixels, 640, 480)
        assert np.all(out == 137)

    def test_crop_eye_produces_standard_frame(self):
        frame = GrayImage(
            np.random.default_rng(3).integers(0, 256, (832, 832), dtype=np.uint8)
        )
        eye = capture.crop_eye(frame, BoundingBox(60, 60, 640, 640))
        assert eye.pixels.shape == (480, 640)
