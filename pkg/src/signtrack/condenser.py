"""Collapse tracklets into single geolocated sign predictions.

Three strategies, selectable by tag:

``foi``
    Take the latest detection as-is.  The sign is closest to the camera
    in the frame of interest, so its detection is usually the sharpest.
``wavg``
    Confidence-weighted mean of all detection coordinates.
``tri``
    Intersect the bearing rays from each camera toward its predicted
    sign position by perpendicular-distance least squares.  Falls back
    to ``wavg`` when the geometry cannot support it (single viewpoint,
    cameras too close together, near-parallel rays).

An ``mrf`` tag is reserved for a belief-propagation condenser that is
not part of this package; requesting it raises ``NotImplementedError``
so callers can distinguish "not built" from a typo.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .geodesy import GeoPoint, bearing_deg, from_local_east_north, local_east_north_m
from .similarity import Detection
from .tracker import Tracklet

CONDENSE_METHODS = ("foi", "wavg", "tri")

#: Minimum camera travel (meters) between any two detections for
#: triangulation to be attempted at all.
MIN_BASELINE_M = 1.0

#: Condition-number ceiling on the normal equations; beyond this the
#: rays are close enough to parallel that the intersection is noise.
MAX_CONDITION_NUMBER = 1e8


@dataclass(frozen=True)
class SignPrediction:
    """One physical sign: where it is, what it is, and how we got there."""

    gps: GeoPoint
    class_id: int
    support: int
    method: str

    def __post_init__(self) -> None:
        if self.support < 1:
            raise ValueError(f"support must be at least 1, got {self.support}")
        if not self.method:
            raise ValueError("method tag must be non-empty")


def _majority_class(detections: list[Detection]) -> int:
    """Mode of the detection classes.

    Ties go to the class with the higher summed confidence, then to the
    lower class id so the result never depends on detection order.
    """
    counts = Counter(d.class_id for d in detections)
    confidence: Counter[int] = Counter()
    for d in detections:
        confidence[d.class_id] += d.confidence
    return max(counts, key=lambda c: (counts[c], confidence[c], -c))


def condense_foi(tracklet: Tracklet) -> SignPrediction:
    """Latest-frame detection wins outright."""
    last = tracklet.last
    return SignPrediction(
        gps=last.predicted_gps,
        class_id=last.class_id,
        support=len(tracklet),
        method="foi",
    )


def condense_weighted_average(tracklet: Tracklet) -> SignPrediction:
    dets = tracklet.detections
    weights = np.array([d.confidence for d in dets], dtype=np.float64)
    total = weights.sum()
    if total <= 0.0:
        weights = np.full(len(dets), 1.0 / len(dets))
    else:
        weights = weights / total
    lat = float(np.dot(weights, [d.predicted_gps.lat_deg for d in dets]))
    lon = float(np.dot(weights, [d.predicted_gps.lon_deg for d in dets]))
    return SignPrediction(
        gps=GeoPoint(lat, lon),
        class_id=_majority_class(dets),
        support=len(dets),
        method="wavg",
    )


def _fallback(tracklet: Tracklet) -> SignPrediction:
    averaged = condense_weighted_average(tracklet)
    return SignPrediction(
        gps=averaged.gps,
        class_id=averaged.class_id,
        support=averaged.support,
        method="tri-fallback",
    )


def condense_triangulate(tracklet: Tracklet) -> SignPrediction:
    """Least-squares intersection of per-detection bearing rays.

    Every detection defines a ray from its camera position along the
    bearing toward its predicted sign position.  The returned point
    minimizes the sum of squared perpendicular distances to those rays,
    solved in a local east/north tangent plane centered on the first
    camera.  Geometry that cannot be triangulated degrades to the
    weighted average, with the method tagged ``tri-fallback`` so the
    substitution stays visible downstream.
    """
    dets = tracklet.detections
    if len(dets) < 2:
        return _fallback(tracklet)

    origin = dets[0].camera.position
    cameras = np.array(
        [local_east_north_m(origin, d.camera.position) for d in dets]
    )
    separations = np.linalg.norm(cameras[:, None, :] - cameras[None, :, :], axis=-1)
    if separations.max() < MIN_BASELINE_M:
        return _fallback(tracklet)

    # Ray directions as unit east/north vectors; bearing is measured
    # clockwise from north.  A prediction sitting on top of its camera
    # has no bearing, and without one there is no ray to intersect.
    try:
        bearings = np.radians(
            [bearing_deg(d.camera.position, d.predicted_gps) for d in dets]
        )
    except ValueError:
        return _fallback(tracklet)
    directions = np.column_stack([np.sin(bearings), np.cos(bearings)])

    normal = np.zeros((2, 2))
    rhs = np.zeros(2)
    for cam, direction in zip(cameras, directions):
        projector = np.eye(2) - np.outer(direction, direction)
        normal += projector
        rhs += projector @ cam

    if np.linalg.cond(normal) > MAX_CONDITION_NUMBER:
        return _fallback(tracklet)

    east, north = np.linalg.solve(normal, rhs)
    if not (math.isfinite(east) and math.isfinite(north)):
        return _fallback(tracklet)
    return SignPrediction(
        gps=from_local_east_north(origin, east, north),
        class_id=_majority_class(dets),
        support=len(dets),
        method="tri",
    )


def condense(tracklet: Tracklet, method: str = "wavg") -> SignPrediction:
    """Dispatch on the method tag."""
    if method == "foi":
        return condense_foi(tracklet)
    if method == "wavg":
        return condense_weighted_average(tracklet)
    if method == "tri":
        return condense_triangulate(tracklet)
    if method == "mrf":
        raise NotImplementedError(
            "the mrf condenser is reserved but not implemented"
        )
    raise ValueError(
        f"unknown condenser method {method!r}; expected one of {CONDENSE_METHODS}"
    )
