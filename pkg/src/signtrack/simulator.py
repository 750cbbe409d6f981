"""Seeded synthetic road segments with controllable detector noise.

A segment is a camera driving a gently curving path at roughly one
frame per 8 meters, past signs planted a few meters off the roadside.
Everything downstream of the detector can then be exercised with exact
ground truth: ``generate_segment`` produces clean annotations, and
``degrade_to_detections`` corrupts them the way a real detector would
(missed signs, GPS scatter, class confusion, box jitter, spurious
boxes).

The camera projection is deliberately simple: a 90 degree horizontal
field of view mapped linearly onto the image width, apparent size
falling off as 1/distance.  Nothing in the pipeline depends on the
projection being physical, only on it being monotone and consistent
between annotation and replay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .geodesy import (
    CameraPose,
    GeoPoint,
    bearing_deg,
    from_local_east_north,
    haversine_m,
    move,
    wrap_heading_deg,
    wrap_relative_deg,
)
from .similarity import BoundingBox, Detection

IMAGE_WIDTH = 1920
IMAGE_HEIGHT = 1080

DEFAULT_VISIBILITY_RADIUS_M = 100.0
DEFAULT_CLASS_COUNT = 50
DEFAULT_CLASS_EXPONENT = 1.5
DEFAULT_FRAME_SPACING_M = 8.0

#: Per-step uniform jitter on frame spacing, as a fraction.
FRAME_SPACING_JITTER = 0.25

#: Horizontal field of view, degrees to either side of the heading.
HALF_FOV_DEG = 45.0

#: Synthetic focal constant: box side in px = FOCAL_PX * size_m / distance_m.
FOCAL_PX = 1700.0
MIN_BOX_SIDE_PX = 8.0
MAX_BOX_SIDE_PX = 400.0
BOX_CENTER_Y_PX = 0.40 * IMAGE_HEIGHT

DEFAULT_SIGN_SIZE_M = 0.75

#: Lateral offset of sign posts from the camera path, meters.
SIGN_LATERAL_MIN_M = 2.0
SIGN_LATERAL_MAX_M = 6.0

#: Where every synthetic segment starts.
SEGMENT_ORIGIN = GeoPoint(44.0, -73.0)

#: Confidence distributions: real detections skew high, spurious low.
TRUE_CONFIDENCE_BETA = (8.0, 2.0)
FALSE_CONFIDENCE_BETA = (2.0, 8.0)


@dataclass(frozen=True)
class NoiseConfig:
    """Detector corruption rates applied when degrading annotations."""

    gps_sigma_m: float = 0.0
    class_confusion_rate: float = 0.0
    bbox_jitter_px: float = 0.0
    miss_rate: float = 0.0
    false_positive_rate: float = 0.0

    def __post_init__(self) -> None:
        if not (self.gps_sigma_m >= 0.0 and math.isfinite(self.gps_sigma_m)):
            raise ValueError(f"gps_sigma_m must be non-negative, got {self.gps_sigma_m}")
        if not (self.bbox_jitter_px >= 0.0 and math.isfinite(self.bbox_jitter_px)):
            raise ValueError(f"bbox_jitter_px must be non-negative, got {self.bbox_jitter_px}")
        for name in ("class_confusion_rate", "miss_rate", "false_positive_rate"):
            rate = getattr(self, name)
            if not 0.0 <= rate <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {rate}")


@dataclass(frozen=True)
class SimConfig:
    """Everything that determines a synthetic segment, seed included."""

    seed: int
    path_length_m: float = 400.0
    turn_rate_deg: float = 2.0
    sign_density_per_km: float = 20.0
    class_count: int = DEFAULT_CLASS_COUNT
    class_exponent: float = DEFAULT_CLASS_EXPONENT
    assembly_probability: float = 0.0
    visibility_radius_m: float = DEFAULT_VISIBILITY_RADIUS_M
    frame_spacing_m: float = DEFAULT_FRAME_SPACING_M
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    # Constraints used by controlled benchmarks: force every sign class
    # to be distinct, and keep signs at least this far apart.
    unique_classes: bool = False
    min_sign_spacing_m: float = 0.0

    def __post_init__(self) -> None:
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ValueError(f"seed must be a non-negative int, got {self.seed!r}")
        if not self.path_length_m > 0.0:
            raise ValueError(f"path_length_m must be positive, got {self.path_length_m}")
        if self.turn_rate_deg < 0.0:
            raise ValueError(f"turn_rate_deg must be non-negative, got {self.turn_rate_deg}")
        if self.sign_density_per_km < 0.0:
            raise ValueError(
                f"sign_density_per_km must be non-negative, got {self.sign_density_per_km}"
            )
        if self.class_count < 1:
            raise ValueError(f"class_count must be at least 1, got {self.class_count}")
        if not self.class_exponent > 0.0:
            raise ValueError(f"class_exponent must be positive, got {self.class_exponent}")
        if not 0.0 <= self.assembly_probability <= 1.0:
            raise ValueError(
                f"assembly_probability must lie in [0, 1], got {self.assembly_probability}"
            )
        if not self.visibility_radius_m > 0.0:
            raise ValueError(
                f"visibility_radius_m must be positive, got {self.visibility_radius_m}"
            )
        if not self.frame_spacing_m > 0.0:
            raise ValueError(f"frame_spacing_m must be positive, got {self.frame_spacing_m}")
        if self.min_sign_spacing_m < 0.0:
            raise ValueError(
                f"min_sign_spacing_m must be non-negative, got {self.min_sign_spacing_m}"
            )


@dataclass(frozen=True)
class Annotation:
    """Ground-truth observation of one sign in one frame."""

    frame_index: int
    bbox: BoundingBox
    class_id: int
    gps: GeoPoint
    sign_id: int
    side: str
    assembly: bool
    camera: CameraPose

    def __post_init__(self) -> None:
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be non-negative, got {self.frame_index}")
        if self.class_id < 0:
            raise ValueError(f"class_id must be non-negative, got {self.class_id}")
        if self.sign_id < 0:
            raise ValueError(f"sign_id must be non-negative, got {self.sign_id}")
        if self.side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {self.side!r}")


@dataclass(frozen=True)
class SegmentFrame:
    """One camera exposure and everything annotated in it."""

    frame_index: int
    camera: CameraPose
    annotations: list[Annotation]


@dataclass(frozen=True)
class RoadSegment:
    segment_id: int
    frames: list[SegmentFrame]
    image_width: int = IMAGE_WIDTH
    image_height: int = IMAGE_HEIGHT

    def __post_init__(self) -> None:
        if self.segment_id < 0:
            raise ValueError(f"segment_id must be non-negative, got {self.segment_id}")
        if self.image_width < 1 or self.image_height < 1:
            raise ValueError("image dimensions must be positive")
        indices = [f.frame_index for f in self.frames]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError(f"frame indices must strictly increase, got {indices}")
        identity: dict[int, tuple[GeoPoint, int]] = {}
        for frame in self.frames:
            for ann in frame.annotations:
                if ann.frame_index != frame.frame_index:
                    raise ValueError(
                        f"annotation frame {ann.frame_index} filed under "
                        f"frame {frame.frame_index}"
                    )
                expected = identity.setdefault(ann.sign_id, (ann.gps, ann.class_id))
                if expected != (ann.gps, ann.class_id):
                    raise ValueError(
                        f"sign {ann.sign_id} changes GPS or class between frames"
                    )


def project_sign_to_bbox(
    camera: CameraPose,
    sign_gps: GeoPoint,
    sign_size_m: float = DEFAULT_SIGN_SIZE_M,
    visibility_radius_m: float = DEFAULT_VISIBILITY_RADIUS_M,
) -> BoundingBox | None:
    """Map a sign into image coordinates, or None when it is not visible.

    Relative bearing covers the 90 degree field of view linearly across
    the image width; apparent size falls off as 1/distance between the
    clamp limits.  A box straddling the left image edge is pushed fully
    into frame (coordinates stay non-negative); the right edge needs no
    such care since only the minimum corner is sign-constrained.
    """
    distance = haversine_m(camera.position, sign_gps)
    if distance > visibility_radius_m or distance < 1e-6:
        return None
    relative = wrap_relative_deg(
        bearing_deg(camera.position, sign_gps) - camera.heading_deg
    )
    if abs(relative) > HALF_FOV_DEG:
        return None
    center_x = (relative + HALF_FOV_DEG) / (2 * HALF_FOV_DEG) * IMAGE_WIDTH
    side = min(max(FOCAL_PX * sign_size_m / distance, MIN_BOX_SIDE_PX), MAX_BOX_SIDE_PX)
    x_min = center_x - side / 2
    if x_min < 0.0:
        x_min = 0.0
    return BoundingBox(
        x_min=x_min,
        y_min=BOX_CENTER_Y_PX - side / 2,
        x_max=x_min + side,
        y_max=BOX_CENTER_Y_PX + side / 2,
    )


@dataclass(frozen=True)
class _Sign:
    sign_id: int
    gps: GeoPoint
    class_id: int
    side: str
    assembly: bool


def _build_path(cfg: SimConfig, rng: np.random.Generator) -> list[CameraPose]:
    poses = [CameraPose(SEGMENT_ORIGIN, 0.0)]
    traveled = 0.0
    while traveled < cfg.path_length_m:
        spacing = cfg.frame_spacing_m * (
            1.0 + rng.uniform(-FRAME_SPACING_JITTER, FRAME_SPACING_JITTER)
        )
        heading = wrap_heading_deg(
            poses[-1].heading_deg + rng.normal(0.0, cfg.turn_rate_deg)
        )
        poses.append(CameraPose(move(poses[-1].position, heading, spacing), heading))
        traveled += spacing
    return poses


def _point_along_path(poses: list[CameraPose], arc_m: float) -> tuple[GeoPoint, float]:
    """Interpolated position and local heading at an arc-length offset."""
    traveled = 0.0
    for prev, nxt in zip(poses, poses[1:]):
        step = haversine_m(prev.position, nxt.position)
        if traveled + step >= arc_m:
            return move(prev.position, nxt.heading_deg, arc_m - traveled), nxt.heading_deg
        traveled += step
    return poses[-1].position, poses[-1].heading_deg


def _class_probabilities(cfg: SimConfig) -> np.ndarray:
    weights = (np.arange(cfg.class_count) + 1.0) ** -cfg.class_exponent
    return weights / weights.sum()


def _place_signs(
    cfg: SimConfig, poses: list[CameraPose], rng: np.random.Generator
) -> list[_Sign]:
    expected = cfg.sign_density_per_km * cfg.path_length_m / 1000.0
    count = int(rng.poisson(expected))
    if cfg.unique_classes:
        count = min(count, cfg.class_count)
    if count == 0:
        return []

    probs = _class_probabilities(cfg)
    if cfg.unique_classes:
        classes = list(rng.choice(cfg.class_count, size=count, replace=False, p=probs))
    else:
        classes = list(rng.choice(cfg.class_count, size=count, p=probs))

    signs: list[_Sign] = []
    placed_gps: list[GeoPoint] = []
    attempts = 0
    while len(signs) < count and attempts < 100 * count:
        attempts += 1
        arc = rng.uniform(0.0, cfg.path_length_m)
        side = "left" if rng.random() < 0.5 else "right"
        lateral = rng.uniform(SIGN_LATERAL_MIN_M, SIGN_LATERAL_MAX_M)
        base, heading = _point_along_path(poses, arc)
        bearing = heading + (90.0 if side == "right" else -90.0)
        gps = move(base, bearing, lateral)
        if cfg.min_sign_spacing_m > 0.0 and any(
            haversine_m(gps, other) < cfg.min_sign_spacing_m for other in placed_gps
        ):
            continue
        assembly = rng.random() < cfg.assembly_probability
        members = int(rng.integers(2, 5)) if assembly else 1
        for _ in range(members):
            if len(signs) == len(classes):
                break
            signs.append(_Sign(
                sign_id=len(signs),
                gps=gps,
                class_id=int(classes[len(signs)]),
                side=side,
                assembly=assembly,
            ))
        placed_gps.append(gps)
    return signs


def generate_segment(cfg: SimConfig) -> RoadSegment:
    """Build one deterministic segment from its config."""
    rng = np.random.default_rng(cfg.seed)
    poses = _build_path(cfg, rng)
    signs = _place_signs(cfg, poses, rng)

    frames: list[SegmentFrame] = []
    for index, camera in enumerate(poses):
        annotations = []
        for sign in signs:
            bbox = project_sign_to_bbox(
                camera, sign.gps, visibility_radius_m=cfg.visibility_radius_m
            )
            if bbox is None:
                continue
            annotations.append(Annotation(
                frame_index=index,
                bbox=bbox,
                class_id=sign.class_id,
                gps=sign.gps,
                sign_id=sign.sign_id,
                side=sign.side,
                assembly=sign.assembly,
                camera=camera,
            ))
        frames.append(SegmentFrame(index, camera, annotations))
    return RoadSegment(segment_id=cfg.seed, frames=frames)


def _jitter_box(bbox: BoundingBox, sigma_px: float, rng: np.random.Generator) -> BoundingBox:
    dx_min, dy_min, dx_max, dy_max = rng.normal(0.0, sigma_px, size=4)
    x_min = max(0.0, bbox.x_min + dx_min)
    y_min = max(0.0, bbox.y_min + dy_min)
    x_max = bbox.x_max + dx_max
    y_max = bbox.y_max + dy_max
    if x_max <= x_min:
        x_max = x_min + 1.0
    if y_max <= y_min:
        y_max = y_min + 1.0
    return BoundingBox(x_min, y_min, x_max, y_max)


def _false_positive(
    frame: SegmentFrame,
    noise: NoiseConfig,
    class_count: int,
    visibility_radius_m: float,
    rng: np.random.Generator,
) -> Detection:
    side = rng.uniform(MIN_BOX_SIDE_PX, MAX_BOX_SIDE_PX / 2)
    center_x = rng.uniform(side / 2, IMAGE_WIDTH - side / 2)
    center_y = rng.uniform(side / 2, IMAGE_HEIGHT - side / 2)
    bearing = frame.camera.heading_deg + rng.uniform(-HALF_FOV_DEG, HALF_FOV_DEG)
    distance = rng.uniform(5.0, visibility_radius_m)
    return Detection(
        frame_index=frame.frame_index,
        bbox=BoundingBox(
            center_x - side / 2, center_y - side / 2,
            center_x + side / 2, center_y + side / 2,
        ),
        class_id=int(rng.integers(class_count)),
        confidence=float(rng.beta(*FALSE_CONFIDENCE_BETA)),
        predicted_gps=move(frame.camera.position, bearing, distance),
        camera=frame.camera,
    )


def degrade_to_detections(
    segment: RoadSegment,
    noise: NoiseConfig,
    rng: np.random.Generator,
    class_count: int = DEFAULT_CLASS_COUNT,
    visibility_radius_m: float = DEFAULT_VISIBILITY_RADIUS_M,
) -> list[list[Detection]]:
    """Corrupt a segment's annotations into detector-like detections.

    Per annotation: maybe dropped, GPS scattered, class confused
    uniformly among the other ``class_count - 1`` classes, box
    jittered; confidence always drawn from the true-detection Beta.
    Each frame then gains a spurious detection with probability
    ``noise.false_positive_rate``.
    """
    per_frame: list[list[Detection]] = []
    for frame in segment.frames:
        detections: list[Detection] = []
        for ann in frame.annotations:
            if rng.random() < noise.miss_rate:
                continue
            north = rng.normal(0.0, noise.gps_sigma_m)
            east = rng.normal(0.0, noise.gps_sigma_m)
            gps = from_local_east_north(ann.gps, east, north)
            class_id = ann.class_id
            if rng.random() < noise.class_confusion_rate and class_count > 1:
                class_id = int(
                    (ann.class_id + rng.integers(1, class_count)) % class_count
                )
            bbox = ann.bbox
            if noise.bbox_jitter_px > 0.0:
                bbox = _jitter_box(bbox, noise.bbox_jitter_px, rng)
            detections.append(Detection(
                frame_index=ann.frame_index,
                bbox=bbox,
                class_id=class_id,
                confidence=float(rng.beta(*TRUE_CONFIDENCE_BETA)),
                predicted_gps=gps,
                camera=ann.camera,
            ))
        if rng.random() < noise.false_positive_rate:
            detections.append(_false_positive(
                frame, noise, class_count, visibility_radius_m, rng
            ))
        per_frame.append(detections)
    return per_frame
