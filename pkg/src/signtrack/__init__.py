"""Road-sign mapping from dashcam detections.

The pipeline associates per-frame sign detections into tracklets,
collapses each tracklet to a single geolocated prediction, and scores
predictions against ground truth.  A simulator generates synthetic
segments for benchmarking, and every stage has an on-disk format plus
a CLI wrapper.
"""

from .condenser import CONDENSE_METHODS, SignPrediction, condense
from .evaluation import (
    MatchReport,
    average_precision,
    gps_error_stats,
    ground_truth_from_segment,
    match_predictions,
    mean_average_precision,
)
from .geodesy import (
    CameraPose,
    GeoPoint,
    bearing_deg,
    from_local_east_north,
    haversine_m,
    local_east_north_m,
    move,
    wrap_heading_deg,
)
from .similarity import (
    BoundingBox,
    ClassEmbedding,
    Detection,
    GaussianNoiseModel,
    MetricModel,
    NoiseModel,
    TrainingPair,
    baseline_score,
    build_pair_features,
    generate_training_pairs,
    harvest_noise_model,
    model_score,
    train_similarity_model,
)
from .simulator import (
    Annotation,
    NoiseConfig,
    RoadSegment,
    SegmentFrame,
    SimConfig,
    degrade_to_detections,
    generate_segment,
    project_sign_to_bbox,
)
from .tracker import (
    BaselineScorer,
    ModelScorer,
    Tracklet,
    TrackerConfig,
    track_segment,
)

__version__ = "0.1.0"

__all__ = [
    "Annotation",
    "BaselineScorer",
    "BoundingBox",
    "CameraPose",
    "ClassEmbedding",
    "CONDENSE_METHODS",
    "condense",
    "Detection",
    "GaussianNoiseModel",
    "GeoPoint",
    "MatchReport",
    "MetricModel",
    "ModelScorer",
    "NoiseConfig",
    "NoiseModel",
    "RoadSegment",
    "SegmentFrame",
    "SignPrediction",
    "SimConfig",
    "TrackerConfig",
    "Tracklet",
    "TrainingPair",
    "average_precision",
    "baseline_score",
    "bearing_deg",
    "build_pair_features",
    "degrade_to_detections",
    "from_local_east_north",
    "generate_segment",
    "generate_training_pairs",
    "gps_error_stats",
    "ground_truth_from_segment",
    "harvest_noise_model",
    "haversine_m",
    "local_east_north_m",
    "match_predictions",
    "mean_average_precision",
    "model_score",
    "move",
    "project_sign_to_bbox",
    "track_segment",
    "train_similarity_model",
    "wrap_heading_deg",
    "__version__",
]
