"""Pixel-space points and axis-aligned boxes shared by cropping and capture control."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import GeometryError


@dataclass(frozen=True)
class PixelPoint:
    """A real-valued pixel coordinate, top-left origin, x rightward, y downward."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise GeometryError(f"point coordinates must be finite, got ({self.x}, {self.y})")


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box with half-open pixel extents [x_min, x_max) x [y_min, y_max)."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self):
        for v in (self.x_min, self.y_min, self.x_max, self.y_max):
            if not math.isfinite(v):
                raise GeometryError("box coordinates must be finite")
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise GeometryError(
                f"degenerate box: ({self.x_min}, {self.y_min}, {self.x_max}, {self.y_max})"
            )

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def center(self) -> PixelPoint:
        return PixelPoint((self.x_min + self.x_max) / 2.0, (self.y_min + self.y_max) / 2.0)

    def contains_box(self, other: "BoundingBox", tolerance: float = 0.0) -> bool:
        return (
            other.x_min >= self.x_min - tolerance
            and other.y_min >= self.y_min - tolerance
            and other.x_max <= self.x_max + tolerance
            and other.y_max <= self.y_max + tolerance
        )
