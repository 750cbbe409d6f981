"""Frame-by-frame association of detections into tracklets.

Each step scores every active tracklet against every detection in the
next frame, solves the resulting bipartite matching with a cutoff, and
extends, opens, or closes tracklets accordingly.  A tracklet's
representative is its most recent detection; there is no motion model,
because at roughly one frame per second image-space motion prediction
has little to extrapolate from.

Closed tracklets never revive: a sign that disappears for more than
max_gap frames and comes back starts a new tracklet.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .assignment import match_with_cutoff
from .similarity import (
    ClassEmbedding,
    Detection,
    MetricModel,
    SnapshotGrid,
    baseline_score,
    build_detection_snapshot,
    build_pair_features,
    model_score,
)

DEFAULT_IMAGE_SIZE = (1920, 1080)

Scorer = Callable[[Detection, Detection, SnapshotGrid, SnapshotGrid], float]


@dataclass
class Tracklet:
    """Ordered detections attributed to one physical sign."""

    id: int
    detections: list[Detection]

    def __post_init__(self) -> None:
        if self.id < 0:
            raise ValueError(f"tracklet id must be non-negative, got {self.id}")
        if not self.detections:
            raise ValueError("tracklet must contain at least one detection")
        frames = [d.frame_index for d in self.detections]
        if any(b <= a for a, b in zip(frames, frames[1:])):
            raise ValueError(f"tracklet frame indices must strictly increase, got {frames}")

    @property
    def last(self) -> Detection:
        return self.detections[-1]

    def append(self, det: Detection) -> None:
        if det.frame_index <= self.last.frame_index:
            raise ValueError(
                f"cannot append frame {det.frame_index} after frame "
                f"{self.last.frame_index}"
            )
        self.detections.append(det)

    def __len__(self) -> int:
        return len(self.detections)


class BaselineScorer:
    """Analytic scorer; ignores the snapshot grids."""

    def __call__(self, a: Detection, b: Detection,
                 grid_a: SnapshotGrid, grid_b: SnapshotGrid) -> float:
        return baseline_score(a, b)


class ModelScorer:
    """Trained metric model wrapped into the scorer protocol."""

    def __init__(self, model: MetricModel, embedding: ClassEmbedding | None = None):
        self.model = model
        self.embedding = embedding if embedding is not None else model.embedding
        if self.embedding is None:
            raise ValueError("model scorer needs a class embedding table")

    def __call__(self, a: Detection, b: Detection,
                 grid_a: SnapshotGrid, grid_b: SnapshotGrid) -> float:
        features = build_pair_features(a, b, grid_a, grid_b, self.embedding)
        return model_score(self.model, features)


@dataclass
class TrackerConfig:
    scorer: Scorer = field(default_factory=BaselineScorer)
    threshold: float = 0.7
    max_gap: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold < 1.0:
            raise ValueError(f"threshold must lie in (0, 1), got {self.threshold}")
        if not isinstance(self.max_gap, int) or self.max_gap < 0:
            raise ValueError(f"max_gap must be a non-negative int, got {self.max_gap!r}")


@dataclass
class ActiveTrack:
    """A tracklet still eligible for extension, with its miss counter
    and the snapshot grid of its last detection's frame."""

    tracklet: Tracklet
    misses: int
    grid: SnapshotGrid


def step_frame(
    active: list[ActiveTrack],
    detections: list[Detection],
    cfg: TrackerConfig,
    grid: SnapshotGrid,
    id_start: int = 0,
) -> tuple[list[ActiveTrack], list[ActiveTrack], list[Tracklet]]:
    """One tracker iteration; returns (extended, new, closed).

    Matched tracks absorb their detection and reset their miss count;
    unmatched detections open tracklets with ids id_start, id_start+1,
    ... in detection order; unmatched tracks age and close once their
    miss count exceeds max_gap.  Input ActiveTracks are mutated.
    """
    cost = np.zeros((len(active), len(detections)))
    for i, track in enumerate(active):
        for j, det in enumerate(detections):
            cost[i, j] = cfg.scorer(track.tracklet.last, det, track.grid, grid)
    pairs = match_with_cutoff(cost, cfg.threshold)
    matched_tracks = {i for i, _ in pairs}
    matched_dets = {j for _, j in pairs}

    extended: list[ActiveTrack] = []
    closed: list[Tracklet] = []
    for i, j in pairs:
        track = active[i]
        track.tracklet.append(detections[j])
        track.misses = 0
        track.grid = grid
        extended.append(track)
    for i, track in enumerate(active):
        if i in matched_tracks:
            continue
        track.misses += 1
        if track.misses > cfg.max_gap:
            closed.append(track.tracklet)
        else:
            extended.append(track)

    new: list[ActiveTrack] = []
    for j, det in enumerate(detections):
        if j not in matched_dets:
            new.append(ActiveTrack(Tracklet(id_start + len(new), [det]), 0, grid))
    return extended, new, closed


def track_segment(
    frames: list[list[Detection]],
    cfg: TrackerConfig,
    image_size: tuple[int, int] = DEFAULT_IMAGE_SIZE,
) -> list[Tracklet]:
    """Track a whole segment; returns tracklets ordered by id.

    frames is the segment's per-frame detection lists in frame order;
    empty frames still age active tracklets.  Every input detection
    lands in exactly one tracklet.
    """
    active: list[ActiveTrack] = []
    done: list[Tracklet] = []
    next_id = 0
    for detections in frames:
        grid = build_detection_snapshot(detections, image_size)
        extended, new, closed = step_frame(active, detections, cfg, grid, next_id)
        next_id += len(new)
        active = extended + new
        done.extend(closed)
    done.extend(track.tracklet for track in active)
    return sorted(done, key=lambda t: t.id)
