"""Detector-noise models: harvested empirical samples or a Gaussian stand-in.

A noise model answers one question: when a detector sees an annotated
sign, how wrong are its GPS, class, and box?  The empirical model is
harvested by pairing each annotation with the unique detection that
overlaps it convincingly; the Gaussian model fakes the same contract
from a handful of parameters so training can proceed before any
detections exist.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geodesy import MEAN_EARTH_RADIUS_M
from .detection import iou

HARVEST_IOU_THRESHOLD = 0.9

_METERS_PER_DEG = MEAN_EARTH_RADIUS_M * math.pi / 180.0


@dataclass(frozen=True)
class NoiseSample:
    """One observed annotation-to-detection discrepancy."""

    d_lat_deg: float
    d_lon_deg: float
    class_match: bool
    d_bbox: tuple[float, float, float, float]

    def __post_init__(self) -> None:
        if len(self.d_bbox) != 4:
            raise ValueError(f"d_bbox must have 4 entries, got {len(self.d_bbox)}")

    def is_zero(self) -> bool:
        return (
            self.d_lat_deg == 0.0
            and self.d_lon_deg == 0.0
            and self.class_match
            and all(d == 0.0 for d in self.d_bbox)
        )


class NoiseModel:
    """Empirical noise distribution: a bag of harvested samples."""

    def __init__(self, samples: list[NoiseSample] | None = None):
        self.samples: list[NoiseSample] = list(samples or [])

    def __len__(self) -> int:
        return len(self.samples)

    def draw(self, rng: np.random.Generator) -> NoiseSample:
        """Uniform bootstrap draw from the stored samples."""
        if not self.samples:
            raise ValueError("cannot sample from an empty noise model")
        return self.samples[int(rng.integers(len(self.samples)))]


class GaussianNoiseModel:
    """Parametric noise source implementing the same draw contract.

    GPS error is an isotropic per-axis Gaussian in meters, converted to
    degrees at a fixed reference latitude; the class survives with the
    configured probability; each box coordinate gets independent
    Gaussian jitter.  Draw order (north, east, class, box) is fixed so
    a seeded generator reproduces sequences exactly.
    """

    def __init__(
        self,
        gps_sigma_m: float = 2.0,
        class_match_rate: float = 0.95,
        bbox_sigma_px: float = 2.0,
        reference_lat_deg: float = 44.0,
    ):
        if gps_sigma_m < 0 or bbox_sigma_px < 0:
            raise ValueError("sigmas must be non-negative")
        if not 0.0 <= class_match_rate <= 1.0:
            raise ValueError(f"class_match_rate must lie in [0, 1], got {class_match_rate}")
        if not abs(reference_lat_deg) < 89.0:
            raise ValueError("reference latitude too close to a pole")
        self.gps_sigma_m = float(gps_sigma_m)
        self.class_match_rate = float(class_match_rate)
        self.bbox_sigma_px = float(bbox_sigma_px)
        self.reference_lat_deg = float(reference_lat_deg)

    def __len__(self) -> int:
        # Parametric models never run dry.
        return 1

    def draw(self, rng: np.random.Generator) -> NoiseSample:
        north_m = rng.normal(0.0, self.gps_sigma_m) if self.gps_sigma_m else 0.0
        east_m = rng.normal(0.0, self.gps_sigma_m) if self.gps_sigma_m else 0.0
        class_match = bool(rng.random() < self.class_match_rate)
        if self.bbox_sigma_px:
            d_bbox = tuple(float(v) for v in rng.normal(0.0, self.bbox_sigma_px, 4))
        else:
            d_bbox = (0.0, 0.0, 0.0, 0.0)
        d_lat = north_m / _METERS_PER_DEG
        d_lon = east_m / (_METERS_PER_DEG * math.cos(math.radians(self.reference_lat_deg)))
        return NoiseSample(d_lat, d_lon, class_match, d_bbox)


def harvest_noise_model(annotations_per_frame, detections_per_frame) -> NoiseModel:
    """Collect discrepancies for unambiguously matched annotations.

    An annotation contributes one sample iff exactly one detection in
    its frame overlaps it with IoU strictly above 0.9; zero or multiple
    such detections leave it out.  The result may be empty, which is
    fine until somebody tries to sample it.
    """
    if len(annotations_per_frame) != len(detections_per_frame):
        raise ValueError(
            f"frame count mismatch: {len(annotations_per_frame)} annotation frames "
            f"vs {len(detections_per_frame)} detection frames"
        )
    samples: list[NoiseSample] = []
    for anns, dets in zip(annotations_per_frame, detections_per_frame):
        for ann in anns:
            matches = [d for d in dets if iou(d.bbox, ann.bbox) > HARVEST_IOU_THRESHOLD]
            if len(matches) != 1:
                continue
            det = matches[0]
            samples.append(
                NoiseSample(
                    d_lat_deg=det.predicted_gps.lat_deg - ann.gps.lat_deg,
                    d_lon_deg=det.predicted_gps.lon_deg - ann.gps.lon_deg,
                    class_match=det.class_id == ann.class_id,
                    d_bbox=(
                        det.bbox.x_min - ann.bbox.x_min,
                        det.bbox.y_min - ann.bbox.y_min,
                        det.bbox.x_max - ann.bbox.x_max,
                        det.bbox.y_max - ann.bbox.y_max,
                    ),
                )
            )
    return NoiseModel(samples)


def sample_noise(model, rng: np.random.Generator) -> NoiseSample:
    """Draw one noise sample; errors on an empty empirical model."""
    return model.draw(rng)
