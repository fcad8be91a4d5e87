"""Masked Hamming distance, shift search, and accept/reject decisions."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from visiris.errors import NoOverlapError, ShapeError
from visiris.matching import (
    DecisionThreshold,
    MatchResult,
    apply_masks,
    decide,
    masked_hd,
    match_shifted,
)
from visiris.template import HEIGHT, IrisTemplate, WIDTH, rotate_template


def template_from(seed=0, planes=2, mask_p=1.0):
    rng = np.random.default_rng(seed)
    code = rng.random((planes, HEIGHT, WIDTH)) > 0.5
    mask = rng.random((planes, HEIGHT, WIDTH)) < mask_p
    return IrisTemplate.from_bit_planes(code, mask)


def counted_hd(t1, t2):
    """Reference distance via unpacked boolean arrays."""
    joint = t1.mask_bits() & t2.mask_bits()
    n = int(joint.sum())
    diff = int((joint & (t1.code_bits() ^ t2.code_bits())).sum())
    return diff / n, n


class TestMaskedHd:
    def test_self_distance_is_zero(self):
        t = template_from(1)
        hd, overlap = masked_hd(t, t)
        assert hd == 0.0
        assert overlap == 2 * HEIGHT * WIDTH

    def test_complement_distance_is_one(self):
        t = template_from(2)
        flipped = IrisTemplate.from_bit_planes(~t.code_bits(), t.mask_bits())
        hd, _ = masked_hd(t, flipped)
        assert hd == 1.0

    def test_symmetry(self):
        a, b = template_from(3, mask_p=0.8), template_from(4, mask_p=0.8)
        assert masked_hd(a, b) == masked_hd(b, a)

    @settings(max_examples=20, deadline=None)
    @given(s1=st.integers(0, 2**30), s2=st.integers(0, 2**30),
           p=st.floats(0.3, 1.0))
    def test_matches_unpacked_reference(self, s1, s2, p):
        a, b = template_from(s1, mask_p=p), template_from(s2, mask_p=p)
        assert masked_hd(a, b) == counted_hd(a, b)

    def test_single_known_mismatch(self):
        code = np.zeros((2, HEIGHT, WIDTH), dtype=bool)
        mask = np.ones((2, HEIGHT, WIDTH), dtype=bool)
        a = IrisTemplate.from_bit_planes(code, mask)
        code2 = code.copy()
        code2[0, 10, 200] = True
        b = IrisTemplate.from_bit_planes(code2, mask)
        hd, overlap = masked_hd(a, b)
        assert overlap == 2 * HEIGHT * WIDTH
        assert hd == 1 / overlap

    def test_masked_out_bits_do_not_count(self):
        rng = np.random.default_rng(5)
        code_a = rng.random((2, HEIGHT, WIDTH)) > 0.5
        code_b = rng.random((2, HEIGHT, WIDTH)) > 0.5
        mask = np.zeros((2, HEIGHT, WIDTH), dtype=bool)
        mask[:, :, :10] = True
        a = IrisTemplate.from_bit_planes(code_a, mask)
        b = IrisTemplate.from_bit_planes(code_b, mask)
        hd, overlap = masked_hd(a, b)
        assert overlap == 2 * HEIGHT * 10
        window = code_a[:, :, :10] ^ code_b[:, :, :10]
        assert hd == window.sum() / overlap

    def test_disjoint_masks_raise(self):
        bits = np.zeros((2, HEIGHT, WIDTH), dtype=bool)
        left = bits.copy()
        left[:, :, :100] = True
        right = bits.copy()
        right[:, :, 300:] = True
        a = IrisTemplate.from_bit_planes(bits, left)
        b = IrisTemplate.from_bit_planes(bits, right)
        with pytest.raises(NoOverlapError, match="joint mask is empty"):
            masked_hd(a, b)

    def test_geometry_mismatch(self):
        with pytest.raises(ShapeError, match="geometries"):
            masked_hd(template_from(6, planes=2), template_from(7, planes=4))


class TestApplyMasks:
    @settings(max_examples=20, deadline=None)
    @given(s1=st.integers(0, 2**30), s2=st.integers(0, 2**30))
    def test_distance_invariant(self, s1, s2):
        a = template_from(s1, mask_p=0.7)
        b = template_from(s2, mask_p=0.7)
        assert masked_hd(apply_masks(a), b) == masked_hd(a, b)
        assert masked_hd(apply_masks(a), apply_masks(b)) == masked_hd(a, b)

    def test_idempotent(self):
        t = template_from(8, mask_p=0.6)
        once = apply_masks(t)
        twice = apply_masks(once)
        np.testing.assert_array_equal(once.code, twice.code)

    def test_masked_positions_become_zero(self):
        t = apply_masks(template_from(9, mask_p=0.5))
        assert not (t.code_bits() & ~t.mask_bits()).any()


class TestShiftSearch:
    def test_identical_templates(self):
        t = template_from(10)
        r = match_shifted(t, t)
        assert r.hd == 0.0 and r.best_shift == 0

    def test_minimum_over_shifts_bounds_zero_shift(self):
        a, b = template_from(11), template_from(12)
        r = match_shifted(a, b)
        hd0, _ = masked_hd(a, b)
        assert r.hd <= hd0

    @pytest.mark.parametrize("k", [-7, -3, -1, 1, 4, 7])
    def test_recovers_rotation(self, k):
        t = template_from(13)
        probe = rotate_template(t, k)
        # the probe equals the gallery rotated by k, so shifting the
        # gallery by k reproduces it exactly
        r = match_shifted(probe, t)
        assert r.hd == 0.0
        assert r.best_shift == k

    def test_rotation_beyond_search_range(self):
        t = template_from(14)
        probe = rotate_template(t, 40)
        r = match_shifted(probe, t, max_shift=7)
        assert r.hd > 0.3  # essentially an imposter comparison

    def test_tie_breaks_to_smallest_magnitude(self):
        # all-zero codes with full masks give hd 0 at every shift; the
        # first candidate visited (0) must win
        zeros = np.zeros((2, HEIGHT, WIDTH), dtype=bool)
        full = np.ones((2, HEIGHT, WIDTH), dtype=bool)
        t = IrisTemplate.from_bit_planes(zeros, full)
        r = match_shifted(t, t)
        assert r.best_shift == 0

    def test_negative_max_shift_rejected(self):
        t = template_from(15)
        with pytest.raises(ValueError, match="max_shift"):
            match_shifted(t, t, max_shift=-1)

    def test_no_overlap_at_any_shift(self):
        bits = np.zeros((2, HEIGHT, WIDTH), dtype=bool)
        ring_a = bits.copy()
        ring_a[:, :, 0:8] = True
        ring_b = bits.copy()
        ring_b[:, :, 250:258] = True
        a = IrisTemplate.from_bit_planes(bits, ring_a)
        b = IrisTemplate.from_bit_planes(bits, ring_b)
        with pytest.raises(NoOverlapError, match="any shift"):
            match_shifted(a, b, max_shift=7)

    def test_skips_overlap_free_shifts(self):
        # single-column masks three columns apart: only gallery shift +3
        # produces any overlap, so the search must skip the empty shifts
        # rather than fail on them
        code = np.zeros((2, HEIGHT, WIDTH), dtype=bool)
        probe_mask = np.zeros((2, HEIGHT, WIDTH), dtype=bool)
        probe_mask[:, :, 100] = True
        gal_mask = np.zeros((2, HEIGHT, WIDTH), dtype=bool)
        gal_mask[:, :, 97] = True
        probe = IrisTemplate.from_bit_planes(code, probe_mask)
        gallery = IrisTemplate.from_bit_planes(code, gal_mask)
        r = match_shifted(probe, gallery, max_shift=7)
        assert r.best_shift == 3
        assert r.overlap_bits == 2 * HEIGHT


class TestDecision:
    def test_defaults(self):
        thr = DecisionThreshold()
        assert thr.hd_threshold == 0.32
        assert thr.min_overlap_bits == 512

    def test_accept_at_threshold(self):
        r = MatchResult(hd=0.32, best_shift=0, overlap_bits=600)
        assert decide(r)

    def test_reject_above_threshold(self):
        r = MatchResult(hd=0.3201, best_shift=0, overlap_bits=600)
        assert not decide(r)

    def test_reject_thin_overlap(self):
        r = MatchResult(hd=0.1, best_shift=0, overlap_bits=511)
        assert not decide(r)
        assert decide(MatchResult(hd=0.1, best_shift=0, overlap_bits=512))

    def test_custom_threshold(self):
        r = MatchResult(hd=0.4, best_shift=0, overlap_bits=600)
        assert decide(r, DecisionThreshold(hd_threshold=0.45))

    def test_result_validation(self):
        with pytest.raises(ValueError):
            MatchResult(hd=1.5, best_shift=0, overlap_bits=10)
        with pytest.raises(ValueError):
            MatchResult(hd=0.5, best_shift=0, overlap_bits=0)
        with pytest.raises(ValueError):
            DecisionThreshold(hd_threshold=2.0)
