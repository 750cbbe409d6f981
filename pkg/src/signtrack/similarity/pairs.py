"""Labeled training-pair generation from annotated segments.

Ground-truth annotations are corrupted through a noise model into
pseudo-detections, then paired across consecutive frames: label 0 when
both observations come from the same physical sign, label 1 otherwise.
The output is balanced 50/50 by subsampling the majority label, because
raw consecutive-frame pairing produces far more different-sign pairs
than same-sign ones and an unbalanced set lets the trivial constant
predictor win.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..geodesy import GeoPoint
from .detection import BoundingBox, Detection
from .features import _assemble_pair_vector, build_detection_snapshot, EMBED_DIM
from .noise import sample_noise


@dataclass(frozen=True, eq=False)
class TrainingPair:
    """One labeled example: features plus the class ids needed to fill
    the (initially zeroed) embedding slots at training time."""

    features: np.ndarray
    label: int
    class_a: int
    class_b: int

    def __post_init__(self) -> None:
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label!r}")


def _perturb_annotation(ann, noise, rng, class_universe) -> Detection:
    sample = sample_noise(noise, rng)
    gps = GeoPoint(
        ann.gps.lat_deg + sample.d_lat_deg, ann.gps.lon_deg + sample.d_lon_deg
    )
    class_id = ann.class_id
    if not sample.class_match:
        others = [c for c in class_universe if c != ann.class_id]
        if others:
            class_id = others[int(rng.integers(len(others)))]
    x_min = max(0.0, ann.bbox.x_min + sample.d_bbox[0])
    y_min = max(0.0, ann.bbox.y_min + sample.d_bbox[1])
    x_max = ann.bbox.x_max + sample.d_bbox[2]
    y_max = ann.bbox.y_max + sample.d_bbox[3]
    if x_max <= x_min:
        x_max = x_min + 1.0
    if y_max <= y_min:
        y_max = y_min + 1.0
    return Detection(
        frame_index=ann.frame_index,
        bbox=BoundingBox(x_min, y_min, x_max, y_max),
        class_id=class_id,
        confidence=1.0,
        predicted_gps=gps,
        camera=ann.camera,
    )


def generate_training_pairs(segments, noise, rng: np.random.Generator) -> list:
    """Build balanced labeled pairs from consecutive-frame annotations.

    Segments that contain no same-sign consecutive pair are skipped
    with a warning; they would contribute only one label.  Embedding
    slots in the returned feature vectors are zero; the trainer fills
    them from its own table using the recorded class ids.
    """
    if hasattr(noise, "__len__") and len(noise) == 0:
        raise ValueError("noise model is empty; harvest or configure one first")

    zero_emb = np.zeros(EMBED_DIM)
    same: list[TrainingPair] = []
    diff_candidates = []  # deferred: (det_i, det_j, grid_i, grid_j)

    for segment in segments:
        class_universe = sorted(
            {a.class_id for f in segment.frames for a in f.annotations}
        )

        pseudo_frames = []
        sign_ids = []
        for frame in segment.frames:
            dets = [
                _perturb_annotation(a, noise, rng, class_universe)
                for a in frame.annotations
            ]
            pseudo_frames.append(dets)
            sign_ids.append([a.sign_id for a in frame.annotations])
        image_size = (segment.image_width, segment.image_height)
        grids = [build_detection_snapshot(dets, image_size) for dets in pseudo_frames]

        seg_same = []
        seg_diff = []
        for t in range(len(pseudo_frames) - 1):
            for i, det_i in enumerate(pseudo_frames[t]):
                for j, det_j in enumerate(pseudo_frames[t + 1]):
                    entry = (det_i, det_j, grids[t], grids[t + 1])
                    if sign_ids[t][i] == sign_ids[t + 1][j]:
                        seg_same.append(entry)
                    else:
                        seg_diff.append(entry)
        if not seg_same:
            warnings.warn(
                f"segment {getattr(segment, 'segment_id', '?')} has no same-sign "
                "consecutive pair; skipped"
            )
            continue
        for det_i, det_j, g_i, g_j in seg_same:
            same.append(
                TrainingPair(
                    features=_assemble_pair_vector(det_i, det_j, g_i, g_j, zero_emb, zero_emb),
                    label=0,
                    class_a=det_i.class_id,
                    class_b=det_j.class_id,
                )
            )
        diff_candidates.extend(seg_diff)

    # Balance before materializing the majority side's features.
    n_keep = min(len(same), len(diff_candidates))
    if len(diff_candidates) > n_keep:
        chosen = rng.choice(len(diff_candidates), size=n_keep, replace=False)
        diff_candidates = [diff_candidates[int(k)] for k in sorted(chosen)]
    if len(same) > n_keep:
        chosen = rng.choice(len(same), size=n_keep, replace=False)
        same = [same[int(k)] for k in sorted(chosen)]

    diff = [
        TrainingPair(
            features=_assemble_pair_vector(det_i, det_j, g_i, g_j, zero_emb, zero_emb),
            label=1,
            class_a=det_i.class_id,
            class_b=det_j.class_id,
        )
        for det_i, det_j, g_i, g_j in diff_candidates
    ]

    pairs = same + diff
    order = rng.permutation(len(pairs))
    return [pairs[int(k)] for k in order]
