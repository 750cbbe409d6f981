"""Pair feature construction and the analytic baseline scorer.

A detection pair is flattened into one fixed-length vector:

    [0:9]      detection a scalars: camera east/north (m), heading (deg),
               predicted-GPS east/north (m), bbox x_min/y_min/x_max/y_max (px)
    [9:59]     detection a class embedding (50 reals)
    [59:68]    detection b scalars, same order
    [68:118]   detection b class embedding
    [118:126]  frame-a snapshot summary (8 reals)
    [126:134]  frame-b snapshot summary
    [134:3206] detection a pixel patch, zero-filled (32*32*3 reserved)
    [3206:]    detection b pixel patch, zero-filled

All positions are meter offsets from detection a's camera, which keeps
the numbers small and makes the vector invariant to where on Earth the
segment sits.  The patch slots exist so the schema already has room for
image crops; nothing fills them today.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..geodesy import haversine_m, local_east_north_m
from .detection import Detection

GRID_SIZE = 10
CELL_FEATURES = 4
EMBED_DIM = 50
SCALARS_PER_DETECTION = 9
SUMMARY_LEN = 2 * CELL_FEATURES
PATCH_LEN = 32 * 32 * 3
DETECTION_BLOCK = SCALARS_PER_DETECTION + EMBED_DIM
PAIR_FEATURE_LEN = 2 * DETECTION_BLOCK + 2 * SUMMARY_LEN + 2 * PATCH_LEN

A_SCALARS = slice(0, SCALARS_PER_DETECTION)
A_EMBED = slice(SCALARS_PER_DETECTION, DETECTION_BLOCK)
B_SCALARS = slice(DETECTION_BLOCK, DETECTION_BLOCK + SCALARS_PER_DETECTION)
B_EMBED = slice(DETECTION_BLOCK + SCALARS_PER_DETECTION, 2 * DETECTION_BLOCK)
SUMMARY_A = slice(2 * DETECTION_BLOCK, 2 * DETECTION_BLOCK + SUMMARY_LEN)
SUMMARY_B = slice(2 * DETECTION_BLOCK + SUMMARY_LEN, 2 * DETECTION_BLOCK + 2 * SUMMARY_LEN)

BASELINE_DISTANCE_SCALE_M = 10.0
BASELINE_CLASS_PENALTY = 1.0


@dataclass
class SnapshotGrid:
    """Coarse spatial summary of one frame's detections.

    cells[gx][gy] holds (class_id, north_m, east_m, confidence) for the
    detection whose bbox center landed in that cell; empty cells stay
    zero.  Offsets are meters from the frame's camera.
    """

    cells: np.ndarray = field(
        default_factory=lambda: np.zeros((GRID_SIZE, GRID_SIZE, CELL_FEATURES))
    )

    def __post_init__(self) -> None:
        self.cells = np.asarray(self.cells, dtype=float)
        if self.cells.shape != (GRID_SIZE, GRID_SIZE, CELL_FEATURES):
            raise ValueError(
                f"snapshot grid must be {GRID_SIZE}x{GRID_SIZE}x{CELL_FEATURES}, "
                f"got {self.cells.shape}"
            )

    def summary(self) -> np.ndarray:
        """Mean then max of each cell feature over the whole grid (8 reals)."""
        flat = self.cells.reshape(-1, CELL_FEATURES)
        return np.concatenate([flat.mean(axis=0), flat.max(axis=0)])


def build_detection_snapshot(
    frame_detections: list[Detection], image_size: tuple[int, int]
) -> SnapshotGrid:
    """Drop each detection into a 10x10 grid cell by its bbox center.

    When two detections land in the same cell the higher-confidence one
    wins; on an exact confidence tie the earlier one stays.
    """
    width, height = image_size
    if width <= 0 or height <= 0:
        raise ValueError(f"image size must be positive, got {image_size}")
    grid = SnapshotGrid()
    occupied_conf = np.full((GRID_SIZE, GRID_SIZE), -1.0)
    for det in frame_detections:
        cx, cy = det.bbox.center()
        gx = min(max(int(GRID_SIZE * cx / width), 0), GRID_SIZE - 1)
        gy = min(max(int(GRID_SIZE * cy / height), 0), GRID_SIZE - 1)
        if det.confidence <= occupied_conf[gx, gy]:
            continue
        east, north = local_east_north_m(det.camera.position, det.predicted_gps)
        grid.cells[gx, gy] = (float(det.class_id), north, east, det.confidence)
        occupied_conf[gx, gy] = det.confidence
    return grid


class ClassEmbedding:
    """Trainable 50-dim vector per sign class over an explicit universe.

    Rows start as deterministic unit vectors derived from (seed,
    class_id), so the same universe always initializes the same way
    regardless of insertion order.  The matrix is mutable: the metric
    trainer updates rows in place.
    """

    def __init__(self, class_ids, dim: int = EMBED_DIM, seed: int = 0):
        ids = sorted(set(int(c) for c in class_ids))
        if not ids:
            raise ValueError("class universe must be nonempty")
        if any(c < 0 for c in ids):
            raise ValueError("class ids must be non-negative")
        if dim < 1:
            raise ValueError(f"embedding dim must be >= 1, got {dim}")
        self.class_ids = tuple(ids)
        self.dim = int(dim)
        self.seed = int(seed)
        self._index = {c: i for i, c in enumerate(ids)}
        self.matrix = np.empty((len(ids), dim), dtype=float)
        for i, c in enumerate(ids):
            row = np.random.default_rng([self.seed, c]).standard_normal(dim)
            self.matrix[i] = row / np.linalg.norm(row)

    @classmethod
    def from_matrix(cls, class_ids, matrix, seed: int = 0) -> "ClassEmbedding":
        """Rebuild an embedding around trained rows (for deserialization)."""
        emb = cls(class_ids, dim=np.asarray(matrix).shape[1], seed=seed)
        matrix = np.asarray(matrix, dtype=float)
        if matrix.shape != emb.matrix.shape:
            raise ValueError(
                f"matrix shape {matrix.shape} does not match universe "
                f"({emb.matrix.shape})"
            )
        emb.matrix = matrix.copy()
        return emb

    def __contains__(self, class_id: int) -> bool:
        return class_id in self._index

    def row_index(self, class_id: int) -> int:
        try:
            return self._index[class_id]
        except KeyError:
            raise KeyError(
                f"class id {class_id} not in embedding universe of "
                f"{len(self.class_ids)} classes"
            ) from None

    def vector(self, class_id: int) -> np.ndarray:
        return self.matrix[self.row_index(class_id)].copy()


def _assemble_pair_vector(
    a: Detection,
    b: Detection,
    grid_a: SnapshotGrid,
    grid_b: SnapshotGrid,
    emb_a: np.ndarray,
    emb_b: np.ndarray,
) -> np.ndarray:
    ref = a.camera.position
    out = np.zeros(PAIR_FEATURE_LEN)

    def scalars(det: Detection) -> list[float]:
        cam_e, cam_n = local_east_north_m(ref, det.camera.position)
        gps_e, gps_n = local_east_north_m(ref, det.predicted_gps)
        return [
            cam_e,
            cam_n,
            det.camera.heading_deg,
            gps_e,
            gps_n,
            det.bbox.x_min,
            det.bbox.y_min,
            det.bbox.x_max,
            det.bbox.y_max,
        ]

    out[A_SCALARS] = scalars(a)
    out[A_EMBED] = emb_a
    out[B_SCALARS] = scalars(b)
    out[B_EMBED] = emb_b
    out[SUMMARY_A] = grid_a.summary()
    out[SUMMARY_B] = grid_b.summary()
    # Patch slots stay zero.
    return out


def build_pair_features(
    a: Detection,
    b: Detection,
    grid_a: SnapshotGrid,
    grid_b: SnapshotGrid,
    embedding: ClassEmbedding,
) -> np.ndarray:
    """Full pair vector with class embeddings resolved from the table.

    Raises KeyError when either detection's class is outside the
    embedding universe.
    """
    return _assemble_pair_vector(
        a, b, grid_a, grid_b, embedding.vector(a.class_id), embedding.vector(b.class_id)
    )


def baseline_score(a: Detection, b: Detection) -> float:
    """Analytic pair score: 0 means same sign, values near 1 mean different.

    score = 1 - exp(-(distance_m / 10 + 1.0 * class_mismatch)), so two
    detections of the same class 6.93 m apart score 0.5 and co-located
    detections of different classes score about 0.632.
    """
    gap = haversine_m(a.predicted_gps, b.predicted_gps)
    penalty = gap / BASELINE_DISTANCE_SCALE_M
    if a.class_id != b.class_id:
        penalty += BASELINE_CLASS_PENALTY
    return 1.0 - math.exp(-penalty)
