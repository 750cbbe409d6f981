"""On-disk formats for every pipeline artifact.

Structured data travels as JSON-lines: a header record naming the
format and version, then one record per frame, tracklet, prediction,
or noise sample.  Serialization is canonical: keys sorted, floats
rounded to 9 significant digits, so identical values always produce
identical bytes and segment files diff cleanly.

Training pairs use ``.npz`` (they are bulk numeric arrays), and trained
metric models use a small binary format with an explicit magic and
shape table so a wrong file fails fast instead of deserializing into
garbage.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .condenser import SignPrediction
from .evaluation import HISTOGRAM_BINS, MatchReport, gps_error_stats
from .geodesy import CameraPose, GeoPoint
from .similarity import (
    BoundingBox,
    ClassEmbedding,
    Detection,
    MetricModel,
    NoiseModel,
    NoiseSample,
    TrainingPair,
)
from .simulator import Annotation, RoadSegment, SegmentFrame
from .tracker import Tracklet

FORMAT_VERSION = 1
SEGMENT_FORMAT = "signtrack-segment"
DETECTIONS_FORMAT = "signtrack-detections"
TRACKLETS_FORMAT = "signtrack-tracklets"
PREDICTIONS_FORMAT = "signtrack-predictions"
NOISE_FORMAT = "signtrack-noise"

MODEL_MAGIC = b"SGTMODEL"
MODEL_VERSION = 1

REPORT_COLUMNS = (
    ["tp", "fn", "fp", "mean_error_m", "std_error_m"]
    + [f"hist_{i:02d}" for i in range(HISTOGRAM_BINS - 1)]
    + ["hist_overflow"]
)


class FormatError(ValueError):
    """A pipeline file that cannot be parsed or fails validation."""


class SegmentFormatError(FormatError):
    """A segment file that cannot be parsed or fails validation."""


def _rounded(value):
    """Round every float in a JSON-ready structure to 9 significant digits."""
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        return float(f"{value:.9g}")
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, dict):
        return {k: _rounded(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_rounded(v) for v in value]
    return value


def _canonical_line(record: dict) -> str:
    return json.dumps(
        _rounded(record), sort_keys=True, separators=(",", ":"), allow_nan=False
    )


def _write_jsonl(path, records: Iterable[dict]) -> None:
    text = "".join(_canonical_line(r) + "\n" for r in records)
    Path(path).write_text(text, encoding="utf-8")


def _read_jsonl(path, error: type[FormatError]) -> Iterator[tuple[int, dict]]:
    with open(path, encoding="utf-8") as handle:
        for number, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as e:
                raise error(f"line {number}: invalid JSON: {e.msg}") from None
            if not isinstance(record, dict):
                raise error(f"line {number}: expected an object record")
            yield number, record


def _take(record: dict, name: str, line: int, error: type[FormatError]):
    if not isinstance(record, dict) or name not in record:
        raise error(f"line {line}: missing field '{name}'")
    return record[name]


def _check_header(
    record: dict, line: int, expected_format: str, error: type[FormatError]
) -> None:
    fmt = _take(record, "format", line, error)
    if fmt != expected_format:
        raise error(
            f"line {line}: field 'format': got {fmt!r}, expected {expected_format!r}"
        )
    version = _take(record, "version", line, error)
    if version != FORMAT_VERSION:
        raise error(
            f"line {line}: field 'version': unsupported version {version!r}"
        )


def _header_and_body(path, expected_format: str, error: type[FormatError]):
    stream = _read_jsonl(path, error)
    try:
        line, header = next(stream)
    except StopIteration:
        raise error("line 1: missing header record") from None
    _check_header(header, line, expected_format, error)
    return header, stream


def _camera_record(camera: CameraPose) -> dict:
    return {
        "lat_deg": camera.position.lat_deg,
        "lon_deg": camera.position.lon_deg,
        "heading_deg": camera.heading_deg,
    }


def _camera_from(record: dict, line: int, error: type[FormatError]) -> CameraPose:
    try:
        return CameraPose(
            GeoPoint(
                _take(record, "lat_deg", line, error),
                _take(record, "lon_deg", line, error),
            ),
            _take(record, "heading_deg", line, error),
        )
    except (TypeError, ValueError) as e:
        raise error(f"line {line}: field 'camera': {e}") from None


def _bbox_from(values, line: int, error: type[FormatError]) -> BoundingBox:
    if not isinstance(values, (list, tuple)) or len(values) != 4:
        raise error(f"line {line}: field 'bbox': expected 4 numbers")
    try:
        return BoundingBox(*values)
    except (TypeError, ValueError) as e:
        raise error(f"line {line}: field 'bbox': {e}") from None


# ---------------------------------------------------------------------------
# Segments (ground-truth annotations)

def write_segment(segment: RoadSegment, path) -> None:
    records: list[dict] = [{
        "format": SEGMENT_FORMAT,
        "version": FORMAT_VERSION,
        "segment_id": segment.segment_id,
        "image_width": segment.image_width,
        "image_height": segment.image_height,
    }]
    for frame in segment.frames:
        records.append({
            "frame_index": frame.frame_index,
            "camera": _camera_record(frame.camera),
            "annotations": [
                {
                    "bbox": [a.bbox.x_min, a.bbox.y_min, a.bbox.x_max, a.bbox.y_max],
                    "class_id": a.class_id,
                    "lat_deg": a.gps.lat_deg,
                    "lon_deg": a.gps.lon_deg,
                    "sign_id": a.sign_id,
                    "side": a.side,
                    "assembly": a.assembly,
                }
                for a in frame.annotations
            ],
        })
    _write_jsonl(path, records)


def read_segment(path) -> RoadSegment:
    header, body = _header_and_body(path, SEGMENT_FORMAT, SegmentFormatError)
    segment_id = _take(header, "segment_id", 1, SegmentFormatError)
    width = _take(header, "image_width", 1, SegmentFormatError)
    height = _take(header, "image_height", 1, SegmentFormatError)

    frames: list[SegmentFrame] = []
    for line, record in body:
        frame_index = _take(record, "frame_index", line, SegmentFormatError)
        camera = _camera_from(
            _take(record, "camera", line, SegmentFormatError), line, SegmentFormatError
        )
        annotations = []
        for raw in _take(record, "annotations", line, SegmentFormatError):
            try:
                annotations.append(Annotation(
                    frame_index=frame_index,
                    bbox=_bbox_from(
                        _take(raw, "bbox", line, SegmentFormatError),
                        line, SegmentFormatError,
                    ),
                    class_id=_take(raw, "class_id", line, SegmentFormatError),
                    gps=GeoPoint(
                        _take(raw, "lat_deg", line, SegmentFormatError),
                        _take(raw, "lon_deg", line, SegmentFormatError),
                    ),
                    sign_id=_take(raw, "sign_id", line, SegmentFormatError),
                    side=_take(raw, "side", line, SegmentFormatError),
                    assembly=_take(raw, "assembly", line, SegmentFormatError),
                    camera=camera,
                ))
            except SegmentFormatError:
                raise
            except (TypeError, ValueError) as e:
                raise SegmentFormatError(f"line {line}: field 'annotations': {e}") from None
        frames.append(SegmentFrame(frame_index, camera, annotations))

    try:
        return RoadSegment(
            segment_id=segment_id,
            frames=frames,
            image_width=width,
            image_height=height,
        )
    except (TypeError, ValueError) as e:
        raise SegmentFormatError(f"segment invalid: {e}") from None


# ---------------------------------------------------------------------------
# Detections (degraded observations, one record per frame)

def _detection_record(det: Detection, with_frame: bool) -> dict:
    record = {
        "bbox": [det.bbox.x_min, det.bbox.y_min, det.bbox.x_max, det.bbox.y_max],
        "class_id": det.class_id,
        "confidence": det.confidence,
        "lat_deg": det.predicted_gps.lat_deg,
        "lon_deg": det.predicted_gps.lon_deg,
        "camera": _camera_record(det.camera),
    }
    if with_frame:
        record["frame_index"] = det.frame_index
    return record


def _detection_from(
    raw: dict, frame_index: int | None, line: int, error: type[FormatError]
) -> Detection:
    if frame_index is None:
        frame_index = _take(raw, "frame_index", line, error)
    try:
        return Detection(
            frame_index=frame_index,
            bbox=_bbox_from(_take(raw, "bbox", line, error), line, error),
            class_id=_take(raw, "class_id", line, error),
            confidence=_take(raw, "confidence", line, error),
            predicted_gps=GeoPoint(
                _take(raw, "lat_deg", line, error),
                _take(raw, "lon_deg", line, error),
            ),
            camera=_camera_from(_take(raw, "camera", line, error), line, error),
        )
    except FormatError:
        raise
    except (TypeError, ValueError) as e:
        raise error(f"line {line}: field 'detections': {e}") from None


def write_detections(
    frames: list[list[Detection]], path, image_size: tuple[int, int]
) -> None:
    records: list[dict] = [{
        "format": DETECTIONS_FORMAT,
        "version": FORMAT_VERSION,
        "image_width": image_size[0],
        "image_height": image_size[1],
    }]
    for index, dets in enumerate(frames):
        records.append({
            "frame_index": index,
            "detections": [_detection_record(d, with_frame=False) for d in dets],
        })
    _write_jsonl(path, records)


def read_detections(path) -> tuple[list[list[Detection]], tuple[int, int]]:
    header, body = _header_and_body(path, DETECTIONS_FORMAT, FormatError)
    image_size = (
        _take(header, "image_width", 1, FormatError),
        _take(header, "image_height", 1, FormatError),
    )
    frames: list[list[Detection]] = []
    for line, record in body:
        frame_index = _take(record, "frame_index", line, FormatError)
        if frame_index != len(frames):
            raise FormatError(
                f"line {line}: field 'frame_index': expected {len(frames)}, "
                f"got {frame_index}"
            )
        frames.append([
            _detection_from(raw, frame_index, line, FormatError)
            for raw in _take(record, "detections", line, FormatError)
        ])
    return frames, image_size


# ---------------------------------------------------------------------------
# Tracklets

def write_tracklets(tracklets: list[Tracklet], path) -> None:
    records: list[dict] = [{
        "format": TRACKLETS_FORMAT,
        "version": FORMAT_VERSION,
    }]
    for t in tracklets:
        records.append({
            "id": t.id,
            "detections": [_detection_record(d, with_frame=True) for d in t.detections],
        })
    _write_jsonl(path, records)


def read_tracklets(path) -> list[Tracklet]:
    _, body = _header_and_body(path, TRACKLETS_FORMAT, FormatError)
    tracklets = []
    for line, record in body:
        detections = [
            _detection_from(raw, None, line, FormatError)
            for raw in _take(record, "detections", line, FormatError)
        ]
        try:
            tracklets.append(Tracklet(_take(record, "id", line, FormatError), detections))
        except (TypeError, ValueError) as e:
            raise FormatError(f"line {line}: invalid tracklet: {e}") from None
    return tracklets


# ---------------------------------------------------------------------------
# Predictions

def write_predictions(preds: list[SignPrediction], path) -> None:
    records: list[dict] = [{
        "format": PREDICTIONS_FORMAT,
        "version": FORMAT_VERSION,
    }]
    for p in preds:
        records.append({
            "lat_deg": p.gps.lat_deg,
            "lon_deg": p.gps.lon_deg,
            "class_id": p.class_id,
            "support": p.support,
            "method": p.method,
        })
    _write_jsonl(path, records)


def read_predictions(path) -> list[SignPrediction]:
    _, body = _header_and_body(path, PREDICTIONS_FORMAT, FormatError)
    preds = []
    for line, record in body:
        try:
            preds.append(SignPrediction(
                gps=GeoPoint(
                    _take(record, "lat_deg", line, FormatError),
                    _take(record, "lon_deg", line, FormatError),
                ),
                class_id=_take(record, "class_id", line, FormatError),
                support=_take(record, "support", line, FormatError),
                method=_take(record, "method", line, FormatError),
            ))
        except FormatError:
            raise
        except (TypeError, ValueError) as e:
            raise FormatError(f"line {line}: invalid prediction: {e}") from None
    return preds


# ---------------------------------------------------------------------------
# Noise models

def write_noise_model(model: NoiseModel, path) -> None:
    records: list[dict] = [{
        "format": NOISE_FORMAT,
        "version": FORMAT_VERSION,
    }]
    for s in model.samples:
        records.append({
            "d_lat_deg": s.d_lat_deg,
            "d_lon_deg": s.d_lon_deg,
            "class_match": s.class_match,
            "d_bbox": list(s.d_bbox),
        })
    _write_jsonl(path, records)


def read_noise_model(path) -> NoiseModel:
    _, body = _header_and_body(path, NOISE_FORMAT, FormatError)
    samples = []
    for line, record in body:
        d_bbox = _take(record, "d_bbox", line, FormatError)
        if not isinstance(d_bbox, list) or len(d_bbox) != 4:
            raise FormatError(f"line {line}: field 'd_bbox': expected 4 numbers")
        try:
            samples.append(NoiseSample(
                d_lat_deg=_take(record, "d_lat_deg", line, FormatError),
                d_lon_deg=_take(record, "d_lon_deg", line, FormatError),
                class_match=_take(record, "class_match", line, FormatError),
                d_bbox=tuple(d_bbox),
            ))
        except FormatError:
            raise
        except (TypeError, ValueError) as e:
            raise FormatError(f"line {line}: invalid noise sample: {e}") from None
    return NoiseModel(samples)


# ---------------------------------------------------------------------------
# Training pairs

def write_pairs(pairs: list[TrainingPair], path) -> None:
    if not pairs:
        raise ValueError("refusing to write an empty pair set")
    # An explicit handle stops numpy from silently appending ".npz" to
    # the path, which would break the write/read symmetry.
    with open(path, "wb") as handle:
        np.savez(
            handle,
            features=np.stack([p.features for p in pairs]),
            labels=np.array([p.label for p in pairs], dtype=np.int64),
            class_a=np.array([p.class_a for p in pairs], dtype=np.int64),
            class_b=np.array([p.class_b for p in pairs], dtype=np.int64),
        )


def read_pairs(path) -> list[TrainingPair]:
    with np.load(path) as data:
        try:
            features = data["features"]
            labels = data["labels"]
            class_a = data["class_a"]
            class_b = data["class_b"]
        except KeyError as e:
            raise FormatError(f"pair archive missing array {e}") from None
    if not (len(features) == len(labels) == len(class_a) == len(class_b)):
        raise FormatError("pair archive arrays disagree on length")
    return [
        TrainingPair(
            features=features[i],
            label=int(labels[i]),
            class_a=int(class_a[i]),
            class_b=int(class_b[i]),
        )
        for i in range(len(labels))
    ]


# ---------------------------------------------------------------------------
# Metric models

def write_model(model: MetricModel, path) -> None:
    """Binary layout: magic, version, layer shape table, weights and
    biases as little-endian float64, then the optional class embedding."""
    blob = bytearray()
    blob += MODEL_MAGIC
    blob += struct.pack("<II", MODEL_VERSION, len(model.weights))
    for w in model.weights:
        blob += struct.pack("<II", w.shape[0], w.shape[1])
    for w, b in zip(model.weights, model.biases):
        blob += np.ascontiguousarray(w, dtype="<f8").tobytes()
        blob += np.ascontiguousarray(b, dtype="<f8").tobytes()
    if model.embedding is None:
        blob += struct.pack("<B", 0)
    else:
        emb = model.embedding
        blob += struct.pack("<B", 1)
        blob += struct.pack("<IIq", len(emb.class_ids), emb.dim, emb.seed)
        blob += np.asarray(emb.class_ids, dtype="<i8").tobytes()
        blob += np.ascontiguousarray(emb.matrix, dtype="<f8").tobytes()
    Path(path).write_bytes(bytes(blob))


class _Cursor:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.offset = 0

    def unpack(self, fmt: str):
        size = struct.calcsize(fmt)
        if self.offset + size > len(self.blob):
            raise FormatError("model file truncated")
        values = struct.unpack_from(fmt, self.blob, self.offset)
        self.offset += size
        return values

    def array(self, count: int, dtype: str) -> np.ndarray:
        size = count * np.dtype(dtype).itemsize
        if self.offset + size > len(self.blob):
            raise FormatError("model file truncated")
        arr = np.frombuffer(self.blob, dtype=dtype, count=count, offset=self.offset)
        self.offset += size
        return arr.copy()


def read_model(path) -> MetricModel:
    blob = Path(path).read_bytes()
    if blob[:len(MODEL_MAGIC)] != MODEL_MAGIC:
        raise FormatError("not a metric model file (bad magic)")
    cursor = _Cursor(blob)
    cursor.offset = len(MODEL_MAGIC)
    version, n_layers = cursor.unpack("<II")
    if version != MODEL_VERSION:
        raise FormatError(f"unsupported model version {version}")
    if not 1 <= n_layers <= 64:
        raise FormatError(f"implausible layer count {n_layers}")
    shapes = [cursor.unpack("<II") for _ in range(n_layers)]
    weights = []
    biases = []
    for n_in, n_out in shapes:
        weights.append(cursor.array(n_in * n_out, "<f8").reshape(n_in, n_out))
        biases.append(cursor.array(n_out, "<f8"))
    (has_embedding,) = cursor.unpack("<B")
    embedding = None
    if has_embedding:
        n_classes, dim, seed = cursor.unpack("<IIq")
        class_ids = cursor.array(n_classes, "<i8")
        matrix = cursor.array(n_classes * dim, "<f8").reshape(n_classes, dim)
        embedding = ClassEmbedding.from_matrix(
            [int(c) for c in class_ids], matrix, seed=int(seed)
        )
    if cursor.offset != len(blob):
        raise FormatError("model file has trailing bytes")
    try:
        return MetricModel(weights=weights, biases=biases, embedding=embedding)
    except ValueError as e:
        raise FormatError(f"model file inconsistent: {e}") from None


# ---------------------------------------------------------------------------
# Evaluation reports

def write_report_csv(report: MatchReport, path) -> None:
    """CSV with counts, error statistics, and the GPS error histogram.

    A report with nothing in it (no matches, no misses, no spurious
    predictions) writes the header row only.
    """
    mean, std, histogram = gps_error_stats(report)
    with open(path, "w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle)
        writer.writerow(REPORT_COLUMNS)
        if report.tp == report.fn == report.fp == 0:
            return
        row = [
            report.tp,
            report.fn,
            report.fp,
            "" if mean is None else f"{mean:.9g}",
            "" if std is None else f"{std:.9g}",
        ]
        row.extend(int(h) for h in histogram)
        writer.writerow(row)


def read_report_csv(path) -> dict:
    """Parse a report CSV back into counts, stats, and histogram."""
    with open(path, newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    if not rows or rows[0] != list(REPORT_COLUMNS):
        raise FormatError("report CSV missing the expected header")
    if len(rows) == 1:
        return {
            "tp": 0, "fn": 0, "fp": 0,
            "mean_error_m": None, "std_error_m": None,
            "histogram": np.zeros(HISTOGRAM_BINS, dtype=np.int64),
        }
    row = rows[1]
    if len(row) != len(REPORT_COLUMNS):
        raise FormatError(
            f"report row has {len(row)} columns, expected {len(REPORT_COLUMNS)}"
        )
    return {
        "tp": int(row[0]),
        "fn": int(row[1]),
        "fp": int(row[2]),
        "mean_error_m": float(row[3]) if row[3] else None,
        "std_error_m": float(row[4]) if row[4] else None,
        "histogram": np.array([int(v) for v in row[5:]], dtype=np.int64),
    }
