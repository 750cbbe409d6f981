"""Core observation types: bounding boxes and per-frame detections."""

from __future__ import annotations

import math
from dataclasses import dataclass

from ..geodesy import CameraPose, GeoPoint


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned pixel box with exclusive ordering constraints."""

    x_min: float
    y_min: float
    x_max: float
    y_max: float

    def __post_init__(self) -> None:
        for name in ("x_min", "y_min", "x_max", "y_max"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise ValueError(f"bounding box {name} must be finite, got {v!r}")
        if self.x_min < 0 or self.y_min < 0:
            raise ValueError("bounding box coordinates must be non-negative")
        if self.x_min >= self.x_max:
            raise ValueError(f"x_min {self.x_min} must be < x_max {self.x_max}")
        if self.y_min >= self.y_max:
            raise ValueError(f"y_min {self.y_min} must be < y_max {self.y_max}")

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))


def iou(a: BoundingBox, b: BoundingBox) -> float:
    """Intersection-over-union of two boxes, 0 when disjoint."""
    ix = min(a.x_max, b.x_max) - max(a.x_min, b.x_min)
    iy = min(a.y_max, b.y_max) - max(a.y_min, b.y_min)
    if ix <= 0.0 or iy <= 0.0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


@dataclass(frozen=True)
class Detection:
    """One detector observation in one frame.

    predicted_gps is the sign position the upstream detector inferred
    from the image, not the camera position; the camera pose at capture
    time rides along so downstream code can re-express everything in a
    camera-relative frame.
    """

    frame_index: int
    bbox: BoundingBox
    class_id: int
    confidence: float
    predicted_gps: GeoPoint
    camera: CameraPose

    def __post_init__(self) -> None:
        if not isinstance(self.frame_index, int) or self.frame_index < 0:
            raise ValueError(f"frame_index must be a non-negative int, got {self.frame_index!r}")
        if not isinstance(self.class_id, int) or self.class_id < 0:
            raise ValueError(f"class_id must be a non-negative int, got {self.class_id!r}")
        if not (isinstance(self.confidence, (int, float)) and 0.0 <= self.confidence <= 1.0):
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence!r}")
