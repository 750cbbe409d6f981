"""Detection-pair features, noise modeling, and similarity scoring."""

from .detection import BoundingBox, Detection, iou
from .features import (
    CELL_FEATURES,
    DETECTION_BLOCK,
    EMBED_DIM,
    GRID_SIZE,
    PAIR_FEATURE_LEN,
    PATCH_LEN,
    SCALARS_PER_DETECTION,
    SUMMARY_LEN,
    ClassEmbedding,
    SnapshotGrid,
    baseline_score,
    build_detection_snapshot,
    build_pair_features,
)
from .metric import (
    MetricModel,
    error_percentiles,
    model_score,
    train_similarity_model,
)
from .noise import (
    GaussianNoiseModel,
    NoiseModel,
    NoiseSample,
    harvest_noise_model,
    sample_noise,
)
from .pairs import TrainingPair, generate_training_pairs

__all__ = [
    "BoundingBox",
    "Detection",
    "iou",
    "CELL_FEATURES",
    "DETECTION_BLOCK",
    "EMBED_DIM",
    "GRID_SIZE",
    "PAIR_FEATURE_LEN",
    "PATCH_LEN",
    "SCALARS_PER_DETECTION",
    "SUMMARY_LEN",
    "ClassEmbedding",
    "SnapshotGrid",
    "baseline_score",
    "build_detection_snapshot",
    "build_pair_features",
    "MetricModel",
    "error_percentiles",
    "model_score",
    "train_similarity_model",
    "GaussianNoiseModel",
    "NoiseModel",
    "NoiseSample",
    "harvest_noise_model",
    "sample_noise",
    "TrainingPair",
    "generate_training_pairs",
]
