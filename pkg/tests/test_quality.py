"""Quality metrics: closed-form examples, defaults, gating, range safety."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from visiris.boxes import PixelPoint
from visiris.errors import ShapeError
from visiris.geometry import IrisBoundaries
from visiris.imaging import EyeImage, GrayImage, MaskImage
from visiris.quality import (
    QualityReport,
    QualityThresholds,
    compute_metrics,
    fft_sharpness,
    gate,
    laplacian_sharpness,
)

BOUNDS = IrisBoundaries(PixelPoint(320.0, 240.0), 45.0,
                        PixelPoint(320.0, 240.0), 110.0)


def annulus_mask(cx=320.0, cy=240.0, r_in=45.0, r_out=110.0, w=640, h=480):
    yy, xx = np.mgrid[0:h, 0:w]
    d2 = (xx - cx) ** 2 + (yy - cy) ** 2
    return MaskImage((d2 > r_in**2) & (d2 <= r_out**2))


def flat_eye(value=120):
    return EyeImage(GrayImage(np.full((480, 640), value, dtype=np.uint8)))


class TestDefaultThresholds:
    def test_default_values(self):
        t = QualityThresholds()
        assert t.overall_quality == 70.0
        assert t.grayscale_utilization == 6.0
        assert t.iris_pupil_contrast == 30.0
        assert t.iris_pupil_concentricity == 90.0
        assert t.iris_pupil_ratio_min == 20.0
        assert t.iris_pupil_ratio_max == 70.0
        assert t.iris_sclera_contrast == 5.0
        assert t.margin_adequacy == 80.0
        assert t.pupil_boundary_circularity == 70.0
        assert t.sharpness == 80.0
        assert t.usable_iris_area == 70.0

    def test_mapping_rejects_unknown_keys(self):
        with pytest.raises(ValueError, match="unknown"):
            QualityThresholds.from_mapping({"sharpnes": 10})

    def test_mapping_partial_override(self):
        t = QualityThresholds.from_mapping({"sharpness": 55.0})
        assert t.sharpness == 55.0 and t.overall_quality == 70.0

    def test_inverted_ratio_band_rejected(self):
        with pytest.raises(ValueError, match="band"):
            QualityThresholds(iris_pupil_ratio_min=70.0, iris_pupil_ratio_max=20.0)


class TestLaplacianSharpness:
    def test_constant_image_is_zero(self):
        assert laplacian_sharpness(GrayImage(np.full((20, 20), 80, np.uint8))) == 0.0

    def test_linear_ramp_is_zero(self):
        # the Laplacian annihilates affine images exactly
        ramp = (np.arange(30)[:, None] * 2 + np.arange(40)[None, :]).astype(np.uint8)
        assert laplacian_sharpness(GrayImage(ramp)) == 0.0

    def test_checkerboard_known_value(self):
        board = np.indices((8, 8)).sum(axis=0) % 2 * np.uint8(255)
        # interior response is 4*(255 - v) - 4*v = +-4*255 with equal counts,
        # so the variance is (4*255)^2
        assert laplacian_sharpness(GrayImage(board.astype(np.uint8))) == pytest.approx(
            (4 * 255.0) ** 2
        )

    def test_too_small_image(self):
        with pytest.raises(ShapeError):
            laplacian_sharpness(GrayImage(np.zeros((2, 5), np.uint8)))


class TestFftSharpness:
    def test_all_zero_scores_zero(self):
        assert fft_sharpness(GrayImage(np.zeros((16, 16), np.uint8))) == 0.0

    def test_constant_scores_zero(self):
        # only DC power, which is excluded by definition
        assert fft_sharpness(GrayImage(np.full((16, 16), 200, np.uint8))) == 0.0

    def test_impulse_matches_bin_count(self):
        h = w = 32
        img = np.zeros((h, w), np.uint8)
        img[5, 7] = 255
        # an impulse has flat power, so the score is the fraction of non-DC
        # bins outside the low-pass disk of radius min(w, h) / 8
        cy, cx = h // 2, w // 2
        outside = 0
        for y in range(h):
            for x in range(w):
                if (y - cy) ** 2 + (x - cx) ** 2 > (min(w, h) / 8.0) ** 2:
                    outside += 1
        expected = outside / (h * w - 1)
        assert fft_sharpness(GrayImage(img)) == pytest.approx(expected, abs=1e-12)

    def test_too_small_image(self):
        with pytest.raises(ShapeError):
            fft_sharpness(GrayImage(np.zeros((8, 20), np.uint8)))


class TestGeometricMetrics:
    def test_concentricity_displaced_pupil(self):
        b = IrisBoundaries(PixelPoint(331.0, 240.0), 45.0,
                           PixelPoint(320.0, 240.0), 110.0)
        r = compute_metrics(flat_eye(), b, annulus_mask())
        assert r.iris_pupil_concentricity == pytest.approx(100 * (1 - 11 / 110))

    def test_concentric_is_100(self):
        r = compute_metrics(flat_eye(), BOUNDS, annulus_mask())
        assert r.iris_pupil_concentricity == 100.0

    def test_ratio_is_radius_quotient(self):
        r = compute_metrics(flat_eye(), BOUNDS, annulus_mask())
        assert r.iris_pupil_ratio == pytest.approx(100 * 45 / 110)

    def test_usable_area_full_annulus(self):
        r = compute_metrics(flat_eye(), BOUNDS, annulus_mask())
        assert r.usable_iris_area == pytest.approx(100.0, abs=0.5)

    def test_usable_area_top_half(self):
        m = annulus_mask()
        bits = m.bits.copy()
        bits[240:, :] = False  # keep only the upper half of the annulus
        r = compute_metrics(flat_eye(), BOUNDS, MaskImage(bits))
        assert r.usable_iris_area == pytest.approx(50.0, abs=1.0)

    def test_margin_centered_eye_is_full(self):
        r = compute_metrics(flat_eye(), BOUNDS, annulus_mask())
        assert r.margin_adequacy == 100.0

    def test_margin_shrinks_near_edge(self):
        cx = 115.0  # left margin 5 px against a 0.6 * 110 = 66 px requirement
        b = IrisBoundaries(PixelPoint(cx, 240.0), 45.0, PixelPoint(cx, 240.0), 110.0)
        r = compute_metrics(flat_eye(), b, annulus_mask(cx=cx))
        assert r.margin_adequacy == pytest.approx(100 * 5 / 66, abs=0.01)

    def test_circularity_perfect_annulus(self):
        r = compute_metrics(flat_eye(), BOUNDS, annulus_mask())
        assert r.pupil_boundary_circularity > 95.0

    def test_circularity_empty_mask_is_zero(self):
        empty = MaskImage(np.zeros((480, 640), dtype=bool))
        r = compute_metrics(flat_eye(), BOUNDS, empty)
        assert r.pupil_boundary_circularity == 0.0
        assert r.usable_iris_area == 0.0
        assert r.overall_quality == 0.0


class TestContrastMetrics:
    def _eye_with_levels(self, pupil, iris, sclera):
        px = np.full((480, 640), sclera, dtype=np.uint8)
        yy, xx = np.mgrid[0:480, 0:640]
        d2 = (xx - 320) ** 2 + (yy - 240) ** 2
        px[d2 <= 110**2] = iris
        px[d2 <= 45**2] = pupil
        return EyeImage(GrayImage(px))

    def test_pupil_contrast_formula(self):
        eye = self._eye_with_levels(10, 120, 235)
        r = compute_metrics(eye, BOUNDS, annulus_mask())
        assert r.iris_pupil_contrast == pytest.approx(
            100 * (120 - 10) / (120 + 10 + 1), abs=0.5
        )

    def test_sclera_contrast_formula(self):
        eye = self._eye_with_levels(10, 120, 235)
        r = compute_metrics(eye, BOUNDS, annulus_mask())
        assert r.iris_sclera_contrast == pytest.approx(
            100 * (235 - 120) / (235 + 120 + 1), abs=0.5
        )

    def test_inverted_contrast_clamps_to_zero(self):
        eye = self._eye_with_levels(200, 120, 50)  # bright pupil, dark sclera
        r = compute_metrics(eye, BOUNDS, annulus_mask())
        assert r.iris_pupil_contrast == 0.0
        assert r.iris_sclera_contrast == 0.0


class TestGrayscaleUtilization:
    def test_single_level_is_zero_bits(self):
        r = compute_metrics(flat_eye(), BOUNDS, annulus_mask())
        assert r.grayscale_utilization == 0.0

    def test_two_equal_levels_is_one_bit(self):
        px = np.full((480, 640), 100, dtype=np.uint8)
        px[:, ::2] = 150
        r = compute_metrics(EyeImage(GrayImage(px)), BOUNDS, annulus_mask())
        assert r.grayscale_utilization == pytest.approx(1.0, abs=0.01)

    def test_bounded_by_eight_bits(self, synth_eye):
        eye, mask, _ = synth_eye
        b = BOUNDS
        r = compute_metrics(eye, b, mask)
        assert 0.0 <= r.grayscale_utilization <= 8.0


class TestSynthEyeGate:
    def test_rendered_eye_passes(self, synth_eye):
        eye, mask, g = synth_eye
        b = IrisBoundaries(
            PixelPoint(g["cx"], g["cy"]), g["pupil_radius"],
            PixelPoint(g["cx"], g["cy"]), g["iris_radius"],
        )
        report = compute_metrics(eye, b, mask)
        verdict = gate(report)
        assert verdict.passed, verdict.failures

    def test_blur_ladder_monotone(self, synth_eye):
        from visiris import synth

        texture = synth.identity_texture(np.random.default_rng(9))
        lap, fft = [], []
        for sigma in (0.0, 1.0, 2.0, 4.0):
            eye, _ = synth.render_eye(texture, 0, 320.0, 240.0, 45.0, 110.0,
                                      sigma, 0.0)
            lap.append(laplacian_sharpness(eye))
            fft.append(fft_sharpness(eye))
        assert all(a > b for a, b in zip(lap, lap[1:])), lap
        assert all(a > b for a, b in zip(fft, fft[1:])), fft


class TestGate:
    def _report(self, **overrides):
        base = dict(
            overall_quality=80.0, grayscale_utilization=7.0,
            iris_pupil_contrast=60.0, iris_pupil_concentricity=99.0,
            iris_pupil_ratio=40.0, iris_sclera_contrast=30.0,
            margin_adequacy=100.0, pupil_boundary_circularity=95.0,
            sharpness=90.0, usable_iris_area=95.0,
        )
        base.update(overrides)
        return QualityReport(**base)

    def test_passing_report(self):
        v = gate(self._report())
        assert v.passed and v.failures == ()

    def test_threshold_is_strict(self):
        # a value exactly at the threshold fails the strict > comparison
        v = gate(self._report(sharpness=80.0))
        assert not v.passed
        assert [n for n, _, _ in v.failures] == ["sharpness"]

    def test_just_above_threshold_passes(self):
        assert gate(self._report(sharpness=80.0001)).passed

    def test_failures_in_declaration_order(self):
        v = gate(self._report(grayscale_utilization=1.0, sharpness=10.0,
                              iris_pupil_contrast=5.0))
        assert [n for n, _, _ in v.failures] == [
            "grayscale_utilization", "iris_pupil_contrast", "sharpness",
        ]

    def test_failure_carries_value_and_threshold(self):
        v = gate(self._report(usable_iris_area=12.0))
        assert v.failures == (("usable_iris_area", 12.0, 70.0),)

    def test_ratio_gates_on_lower_edge(self):
        assert not gate(self._report(iris_pupil_ratio=20.0)).passed
        assert gate(self._report(iris_pupil_ratio=20.5)).passed
        # the upper band edge is reported but not gated
        assert gate(self._report(iris_pupil_ratio=75.0)).passed


class TestJsonRoundTrip:
    def test_report_round_trip(self, synth_eye):
        eye, mask, g = synth_eye
        b = IrisBoundaries(
            PixelPoint(g["cx"], g["cy"]), g["pupil_radius"],
            PixelPoint(g["cx"], g["cy"]), g["iris_radius"],
        )
        r = compute_metrics(eye, b, mask)
        assert QualityReport.from_json_dict(r.to_json_dict()) == r


@st.composite
def eye_and_geometry(draw):
    seed = draw(st.integers(0, 2**31))
    rng = np.random.default_rng(seed)
    style = draw(st.sampled_from(["noise", "flat", "rings"]))
    if style == "noise":
        px = rng.integers(0, 256, (480, 640), dtype=np.uint8)
    elif style == "flat":
        px = np.full((480, 640), draw(st.integers(0, 255)), dtype=np.uint8)
    else:
        yy, xx = np.mgrid[0:480, 0:640]
        px = ((np.hypot(xx - 320, yy - 240) * draw(st.floats(0.1, 4.0))) % 256
              ).astype(np.uint8)
    cx = draw(st.floats(50.0, 590.0))
    cy = draw(st.floats(50.0, 430.0))
    r_p = draw(st.floats(6.0, 80.0))
    r_i = draw(st.floats(r_p + 5.0, 200.0))
    b = IrisBoundaries(PixelPoint(cx, cy), r_p, PixelPoint(cx, cy), r_i)
    mask_style = draw(st.sampled_from(["annulus", "random", "empty"]))
    if mask_style == "annulus":
        yy, xx = np.mgrid[0:480, 0:640]
        d2 = (xx - cx) ** 2 + (yy - cy) ** 2
        bits = (d2 > r_p**2) & (d2 <= r_i**2)
    elif mask_style == "random":
        bits = rng.random((480, 640)) > 0.6
    else:
        bits = np.zeros((480, 640), dtype=bool)
    return EyeImage(GrayImage(px)), b, MaskImage(bits)


class TestMetricRanges:
    @settings(max_examples=40, deadline=None)
    @given(data=eye_and_geometry())
    def test_all_metrics_in_declared_ranges(self, data):
        eye, b, mask = data
        r = compute_metrics(eye, b, mask)
        assert 0.0 <= r.grayscale_utilization <= 8.0
        for name in (
            "overall_quality", "iris_pupil_contrast", "iris_pupil_concentricity",
            "iris_sclera_contrast", "margin_adequacy",
            "pupil_boundary_circularity", "sharpness", "usable_iris_area",
        ):
            v = getattr(r, name)
            assert 0.0 <= v <= 100.0, (name, v)
        assert 0.0 <= r.iris_pupil_ratio < 100.0
        assert all(math.isfinite(getattr(r, f)) for f in r.to_json_dict())

    def test_dimension_mismatch_raises(self):
        small = MaskImage(np.zeros((100, 100), dtype=bool))
        with pytest.raises(ShapeError):
            compute_metrics(flat_eye(), BOUNDS, small)
