"""Masked fractional Hamming distance over packed templates, with shifts.

The distance counts disagreeing code bits where both templates' masks are
on, over both phase planes jointly, divided by the overlap size.  Rotation
tolerance comes from re-scoring the gallery template at column shifts up
to +/-7 and keeping the minimum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoOverlapError, ShapeError
from .template import IrisTemplate, rotate_template

DEFAULT_MAX_SHIFT = 7
DEFAULT_HD_THRESHOLD = 0.32
DEFAULT_MIN_OVERLAP_BITS = 512


@dataclass(frozen=True)
class MatchResult:
    hd: float
    best_shift: int
    overlap_bits: int

    def __post_init__(self):
        if not 0.0 <= self.hd <= 1.0:
            raise ValueError(f"hd {self.hd} outside [0, 1]")
        if self.overlap_bits <= 0:
            raise ValueError("overlap_bits must be positive")

    def to_json_dict(self) -> dict:
        return {"hd": self.hd, "best_shift": self.best_shift,
                "overlap_bits": self.overlap_bits}


@dataclass(frozen=True)
class DecisionThreshold:
    hd_threshold: float = DEFAULT_HD_THRESHOLD
    min_overlap_bits: int = DEFAULT_MIN_OVERLAP_BITS

    def __post_init__(self):
        if not 0.0 <= self.hd_threshold <= 1.0:
            raise ValueError(f"hd_threshold {self.hd_threshold} outside [0, 1]")
        if self.min_overlap_bits < 0:
            raise ValueError("min_overlap_bits must be >= 0")


def _check_geometry(t1: IrisTemplate, t2: IrisTemplate):
    if t1.code.shape != t2.code.shape:
        raise ShapeError(
            f"template geometries differ: {t1.code.shape} vs {t2.code.shape}"
        )


def masked_hd(t1: IrisTemplate, t2: IrisTemplate):
    """Fractional Hamming distance over the joint mask; returns (hd, overlap)."""
    _check_geometry(t1, t2)
    joint = t1.mask & t2.mask
    overlap = int(np.bitwise_count(joint).sum())
    if overlap == 0:
        raise NoOverlapError("no comparable bits: joint mask is empty")
    mismatches = int(np.bitwise_count((t1.code ^ t2.code) & joint).sum())
    return mismatches / overlap, overlap


def apply_masks(t: IrisTemplate) -> IrisTemplate:
    """Zero code bits under a mask-off position; the stored template form."""
    return IrisTemplate(t.code & t.mask, t.mask)


def _shift_order(max_shift: int):
    yield 0
    for k in range(1, max_shift + 1):
        yield -k
        yield k


def match_shifted(probe: IrisTemplate, gallery: IrisTemplate,
                  max_shift: int = DEFAULT_MAX_SHIFT) -> MatchResult:
    """Minimum masked distance over gallery column shifts in [-max_shift, max_shift].

    Ties resolve to the smallest |shift|, negative before positive, because
    candidates are visited in that order and only strict improvements win.
    Shifts with zero mask overlap are skipped; if every shift has zero
    overlap the comparison is an error, never a zero distance.
    """
    _check_geometry(probe, gallery)
    if max_shift < 0:
        raise ValueError("max_shift must be >= 0")
    best = None
    for s in _shift_order(max_shift):
        shifted = rotate_template(gallery, s)
        try:
            hd, overlap = masked_hd(probe, shifted)
        except NoOverlapError:
            continue
        if best is None or hd < best.hd:
            best = MatchResult(hd=hd, best_shift=s, overlap_bits=overlap)
    if best is None:
        raise NoOverlapError(
            f"no comparable bits at any shift in [-{max_shift}, {max_shift}]"
        )
    return best


def decide(r: MatchResult, thr: DecisionThreshold = DecisionThreshold()) -> bool:
    """Accept iff the distance is at or below threshold with enough overlap."""
    return r.hd <= thr.hd_threshold and r.overlap_bits >= thr.min_overlap_bits
