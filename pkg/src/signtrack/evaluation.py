"""Scoring of condensed sign predictions and raw detections.

Predictions are matched one-to-one against surveyed signs by globally
optimal assignment on haversine distance, with pairs beyond the match
radius forbidden.  Greedy nearest-neighbor matching is deliberately
avoided: signs mounted on a shared post sit within a couple of meters
of each other, and greedy matching happily counts one prediction
against two of them.

Detection-level quality is scored with the usual IoU-thresholded
average precision, matched per frame.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .assignment import solve_assignment
from .condenser import SignPrediction
from .geodesy import GeoPoint, haversine_m
from .similarity import BoundingBox, Detection, iou

DEFAULT_MATCH_RADIUS_M = 15.0
DEFAULT_IOU_THRESHOLD = 0.5

#: GPS error histogram: 1 m bins covering [0, 30) plus one overflow bin
#: for everything at or beyond 30 m.
HISTOGRAM_BIN_M = 1.0
HISTOGRAM_RANGE_M = 30.0
HISTOGRAM_BINS = 31


@dataclass(frozen=True)
class GroundTruthSign:
    """One surveyed physical sign."""

    sign_id: int
    gps: GeoPoint
    class_id: int


@dataclass(frozen=True)
class MatchReport:
    """Outcome of matching predictions against ground truth.

    ``gps_errors`` and ``tp_classes`` are aligned, one entry per true
    positive; ``tp_classes`` holds (truth class, predicted class) so
    class agreement can be inspected without re-running the match.
    """

    tp: int
    fn: int
    fp: int
    gps_errors: list[float] = field(default_factory=list)
    tp_classes: list[tuple[int, int]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if min(self.tp, self.fn, self.fp) < 0:
            raise ValueError("counts must be non-negative")
        if len(self.gps_errors) != self.tp or len(self.tp_classes) != self.tp:
            raise ValueError(
                f"expected {self.tp} per-TP records, got "
                f"{len(self.gps_errors)} errors and {len(self.tp_classes)} classes"
            )

    @property
    def class_agreement(self) -> int:
        """True positives whose predicted class matches the truth."""
        return sum(1 for truth, pred in self.tp_classes if truth == pred)


def match_predictions(
    preds: Sequence[SignPrediction],
    truth: Sequence[GroundTruthSign],
    radius_m: float = DEFAULT_MATCH_RADIUS_M,
    require_class_match: bool = False,
) -> MatchReport:
    """One-to-one match of predictions to surveyed signs within a radius.

    Pairs farther apart than ``radius_m`` never match.  Among feasible
    matchings the assignment maximizes the number of matches and, for
    that number, minimizes total distance.  By default a match counts
    as a true positive regardless of predicted class (agreement is
    recorded in the report); ``require_class_match`` additionally
    forbids cross-class pairs.
    """
    if not (np.isfinite(radius_m) and radius_m > 0):
        raise ValueError(f"radius_m must be positive and finite, got {radius_m}")
    if not preds or not truth:
        return MatchReport(tp=0, fn=len(truth), fp=len(preds))

    distance = np.array(
        [[haversine_m(p.gps, t.gps) for t in truth] for p in preds]
    )
    allowed = distance <= radius_m
    if require_class_match:
        class_ok = np.array(
            [[p.class_id == t.class_id for t in truth] for p in preds]
        )
        allowed &= class_ok

    # A forbidden pair costs more than every feasible pair combined, so
    # the minimum-cost assignment uses as few forbidden pairs as
    # possible: it maximizes match count first, total distance second.
    sentinel = (max(len(preds), len(truth)) + 1) * radius_m + 1.0
    cost = np.where(allowed, distance, sentinel)

    errors: list[float] = []
    classes: list[tuple[int, int]] = []
    for i, j in solve_assignment(cost):
        if allowed[i, j]:
            errors.append(float(distance[i, j]))
            classes.append((truth[j].class_id, preds[i].class_id))
    tp = len(errors)
    return MatchReport(
        tp=tp,
        fn=len(truth) - tp,
        fp=len(preds) - tp,
        gps_errors=errors,
        tp_classes=classes,
    )


def gps_error_stats(
    report: MatchReport,
) -> tuple[float | None, float | None, np.ndarray]:
    """Mean, population std, and fixed-bin histogram of the TP errors.

    With no true positives the mean and std are ``None`` and the
    histogram is all zero.  Errors of 30 m or more land in the final
    overflow bin.
    """
    histogram = np.zeros(HISTOGRAM_BINS, dtype=np.int64)
    if not report.gps_errors:
        return None, None, histogram
    errors = np.asarray(report.gps_errors)
    bins = np.minimum(
        (errors / HISTOGRAM_BIN_M).astype(np.int64), HISTOGRAM_BINS - 1
    )
    np.add.at(histogram, bins, 1)
    return float(errors.mean()), float(errors.std()), histogram


def per_class_gps_error(report: MatchReport) -> dict[int, float]:
    """Mean TP error per ground-truth class; classes without TPs absent."""
    sums: dict[int, float] = defaultdict(float)
    counts: dict[int, int] = defaultdict(int)
    for error, (truth_class, _) in zip(report.gps_errors, report.tp_classes):
        sums[truth_class] += error
        counts[truth_class] += 1
    return {c: sums[c] / counts[c] for c in sorted(counts)}


def ground_truth_from_segment(segment) -> list[GroundTruthSign]:
    """Collapse a segment's per-frame annotations into unique signs.

    Accepts any object whose ``frames`` each carry an ``annotations``
    list; each annotation needs ``sign_id``, ``gps``, and ``class_id``.
    Signs come back ordered by id.
    """
    seen: dict[int, GroundTruthSign] = {}
    for frame in segment.frames:
        for ann in frame.annotations:
            if ann.sign_id not in seen:
                seen[ann.sign_id] = GroundTruthSign(
                    sign_id=ann.sign_id, gps=ann.gps, class_id=ann.class_id
                )
    return [seen[sid] for sid in sorted(seen)]


def _match_flags(
    dets: Sequence[Detection],
    anns: Sequence,
    iou_thresh: float,
) -> list[bool]:
    """Greedy per-frame TP/FP flags for detections sorted by confidence."""
    remaining: dict[int, list] = defaultdict(list)
    for ann in anns:
        remaining[ann.frame_index].append(ann)

    flags: list[bool] = []
    for det in dets:
        candidates = remaining.get(det.frame_index, [])
        best_iou = 0.0
        best_k = -1
        for k, ann in enumerate(candidates):
            overlap = iou(det.bbox, ann.bbox)
            if overlap > best_iou:
                best_iou = overlap
                best_k = k
        if best_k >= 0 and best_iou >= iou_thresh:
            candidates.pop(best_k)
            flags.append(True)
        else:
            flags.append(False)
    return flags


def average_precision(
    dets: Iterable[Detection],
    anns: Iterable,
    iou_thresh: float = DEFAULT_IOU_THRESHOLD,
    class_id: int | None = None,
) -> float | None:
    """All-points-interpolated average precision for one class.

    Detections are taken in descending confidence order and each is
    greedily matched, within its own frame, to the unmatched annotation
    it overlaps most; an overlap at or above ``iou_thresh`` is a true
    positive.  With ``class_id`` given, both inputs are filtered to
    that class first.  Returns ``None`` when the class has no
    annotations, since precision against nothing is undefined.
    """
    dets = list(dets)
    anns = list(anns)
    if class_id is not None:
        dets = [d for d in dets if d.class_id == class_id]
        anns = [a for a in anns if a.class_id == class_id]
    if not anns:
        return None
    if not dets:
        return 0.0

    dets.sort(key=lambda d: -d.confidence)
    flags = np.array(_match_flags(dets, anns, iou_thresh))
    tp_cum = np.cumsum(flags)
    fp_cum = np.cumsum(~flags)
    recall = tp_cum / len(anns)
    precision = tp_cum / (tp_cum + fp_cum)

    # All-points interpolation: running max of precision from the right,
    # integrated over every recall step.
    mrec = np.concatenate([[0.0], recall, [1.0]])
    mpre = np.concatenate([[0.0], precision, [0.0]])
    mpre = np.maximum.accumulate(mpre[::-1])[::-1]
    steps = np.flatnonzero(np.diff(mrec))
    return float(np.sum((mrec[steps + 1] - mrec[steps]) * mpre[steps + 1]))


def mean_average_precision(
    dets: Iterable[Detection],
    anns: Iterable,
    iou_thresh: float = DEFAULT_IOU_THRESHOLD,
) -> float:
    """Unweighted mean of per-class average precisions.

    Only classes that appear in the annotations contribute; if none do,
    there is nothing to average and that is an error.
    """
    dets = list(dets)
    anns = list(anns)
    classes = sorted({a.class_id for a in anns})
    if not classes:
        raise ValueError("no annotated classes; mAP is undefined")
    aps = [average_precision(dets, anns, iou_thresh, class_id=c) for c in classes]
    return float(np.mean([ap for ap in aps if ap is not None]))
