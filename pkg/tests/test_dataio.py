import numpy as np
import pytest

from signtrack.condenser import SignPrediction, condense
from signtrack.dataio import (
    FormatError,
    SegmentFormatError,
    read_detections,
    read_model,
    read_noise_model,
    read_pairs,
    read_predictions,
    read_report_csv,
    read_segment,
    read_tracklets,
    write_detections,
    write_model,
    write_noise_model,
    write_pairs,
    write_predictions,
    write_report_csv,
    write_segment,
    write_tracklets,
)
from signtrack.evaluation import MatchReport
from signtrack.geodesy import GeoPoint
from signtrack.similarity import (
    ClassEmbedding,
    MetricModel,
    NoiseModel,
    NoiseSample,
    TrainingPair,
)
from signtrack.simulator import (
    NoiseConfig,
    RoadSegment,
    SimConfig,
    degrade_to_detections,
    generate_segment,
)
from signtrack.tracker import TrackerConfig, track_segment


@pytest.fixture(scope="module")
def segment():
    return generate_segment(SimConfig(seed=31, sign_density_per_km=40.0))


@pytest.fixture(scope="module")
def detections(segment):
    noise = NoiseConfig(gps_sigma_m=1.0, bbox_jitter_px=1.0, miss_rate=0.05)
    return degrade_to_detections(segment, noise, np.random.default_rng(31))


class TestSegmentRoundTrip:
    def test_round_trip_identity(self, segment, tmp_path):
        path = tmp_path / "seg.jsonl"
        write_segment(segment, path)
        loaded = read_segment(path)
        assert loaded.segment_id == segment.segment_id
        assert len(loaded.frames) == len(segment.frames)
        for a, b in zip(segment.frames, loaded.frames):
            assert a.frame_index == b.frame_index
            assert len(a.annotations) == len(b.annotations)

    def test_second_round_trip_is_byte_identical(self, segment, tmp_path):
        first = tmp_path / "a.jsonl"
        second = tmp_path / "b.jsonl"
        write_segment(segment, first)
        write_segment(read_segment(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_identical_segments_identical_bytes(self, segment, tmp_path):
        a = tmp_path / "a.jsonl"
        b = tmp_path / "b.jsonl"
        write_segment(segment, a)
        write_segment(generate_segment(SimConfig(seed=31, sign_density_per_km=40.0)), b)
        assert a.read_bytes() == b.read_bytes()

    def test_empty_segment_is_header_only(self, tmp_path):
        path = tmp_path / "empty.jsonl"
        write_segment(RoadSegment(segment_id=3, frames=[]), path)
        lines = path.read_text().splitlines()
        assert len(lines) == 1
        assert '"format":"signtrack-segment"' in lines[0]
        assert read_segment(path).frames == []

    def test_missing_file(self, tmp_path):
        with pytest.raises(OSError):
            read_segment(tmp_path / "nope.jsonl")

    def test_empty_file_names_header(self, tmp_path):
        path = tmp_path / "zero.jsonl"
        path.write_text("")
        with pytest.raises(SegmentFormatError, match="line 1"):
            read_segment(path)

    def test_truncated_json_names_line(self, segment, tmp_path):
        path = tmp_path / "trunc.jsonl"
        write_segment(segment, path)
        text = path.read_text()
        path.write_text(text[:len(text) // 2].rsplit("\n", 1)[0] + '\n{"frame_ind')
        with pytest.raises(SegmentFormatError, match=r"line \d+: invalid JSON"):
            read_segment(path)

    def test_wrong_format_tag(self, tmp_path, detections):
        path = tmp_path / "dets.jsonl"
        write_detections(detections, path, (1920, 1080))
        with pytest.raises(SegmentFormatError, match="'format'"):
            read_segment(path)

    def test_unknown_version(self, segment, tmp_path):
        path = tmp_path / "seg.jsonl"
        write_segment(segment, path)
        lines = path.read_text().splitlines()
        lines[0] = lines[0].replace('"version":1', '"version":99')
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(SegmentFormatError, match="version"):
            read_segment(path)

    def test_out_of_range_latitude_names_line(self, segment, tmp_path):
        path = tmp_path / "seg.jsonl"
        write_segment(segment, path)
        lines = path.read_text().splitlines()
        target = next(i for i, l in enumerate(lines) if '"annotations":[{' in l)
        lines[target] = lines[target].replace(
            '"lat_deg":44.', '"lat_deg":91.', 1
        )
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(SegmentFormatError, match=f"line {target + 1}"):
            read_segment(path)

    def test_missing_field_named(self, segment, tmp_path):
        path = tmp_path / "seg.jsonl"
        write_segment(segment, path)
        lines = path.read_text().splitlines()
        lines[1] = lines[1].replace('"camera":', '"kamera":')
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(SegmentFormatError, match="line 2: missing field 'camera'"):
            read_segment(path)

    def test_nine_digit_values_survive_round_trip(self, tmp_path):
        # Values already at 9 significant digits must be preserved
        # exactly, not re-rounded into something else.
        seg = generate_segment(SimConfig(seed=32, sign_density_per_km=30.0))
        path = tmp_path / "seg.jsonl"
        write_segment(seg, path)
        once = read_segment(path)
        write_segment(once, path)
        twice = read_segment(path)
        for fa, fb in zip(once.frames, twice.frames):
            assert fa.camera == fb.camera
            for a, b in zip(fa.annotations, fb.annotations):
                assert a == b


class TestDetections:
    def test_round_trip(self, detections, tmp_path):
        path = tmp_path / "dets.jsonl"
        write_detections(detections, path, (1920, 1080))
        loaded, image_size = read_detections(path)
        assert image_size == (1920, 1080)
        assert [len(f) for f in loaded] == [len(f) for f in detections]
        for frame, loaded_frame in zip(detections, loaded):
            for d, l in zip(frame, loaded_frame):
                assert d.class_id == l.class_id
                assert d.frame_index == l.frame_index
                assert d.confidence == pytest.approx(l.confidence, abs=1e-7)
                assert d.predicted_gps.lat_deg == pytest.approx(
                    l.predicted_gps.lat_deg, abs=1e-6
                )
        # The first pass rounds to canonical precision; after that the
        # representation is a fixed point.
        write_detections(loaded, path, (1920, 1080))
        again, _ = read_detections(path)
        assert again == loaded

    def test_empty_frames_preserved(self, tmp_path):
        path = tmp_path / "dets.jsonl"
        write_detections([[], [], []], path, (640, 480))
        loaded, image_size = read_detections(path)
        assert loaded == [[], [], []]
        assert image_size == (640, 480)

    def test_frame_index_gap_rejected(self, detections, tmp_path):
        path = tmp_path / "dets.jsonl"
        write_detections(detections, path, (1920, 1080))
        lines = path.read_text().splitlines()
        lines[1] = lines[1].replace('"frame_index":0', '"frame_index":5')
        path.write_text("\n".join(lines) + "\n")
        with pytest.raises(FormatError, match="frame_index"):
            read_detections(path)

    def test_bad_confidence_rejected(self, detections, tmp_path):
        path = tmp_path / "dets.jsonl"
        write_detections(detections, path, (1920, 1080))
        text = path.read_text().replace('"confidence":0.', '"confidence":7.', 1)
        path.write_text(text)
        with pytest.raises(FormatError, match=r"line \d+"):
            read_detections(path)


class TestTracklets:
    def test_round_trip(self, detections, tmp_path):
        tracklets = track_segment(detections, TrackerConfig())
        assert tracklets
        path = tmp_path / "tracklets.jsonl"
        write_tracklets(tracklets, path)
        loaded = read_tracklets(path)
        assert [t.id for t in loaded] == [t.id for t in tracklets]
        assert [[d.frame_index for d in t.detections] for t in loaded] == \
               [[d.frame_index for d in t.detections] for t in tracklets]
        write_tracklets(loaded, path)
        again = read_tracklets(path)
        assert [t.detections for t in again] == [t.detections for t in loaded]

    def test_condense_after_round_trip(self, detections, tmp_path):
        tracklets = track_segment(detections, TrackerConfig())
        path = tmp_path / "tracklets.jsonl"
        write_tracklets(tracklets, path)
        direct = [condense(t, "wavg") for t in tracklets]
        reloaded = [condense(t, "wavg") for t in read_tracklets(path)]
        for a, b in zip(direct, reloaded):
            assert abs(a.gps.lat_deg - b.gps.lat_deg) < 1e-7
            assert a.class_id == b.class_id

    def test_invalid_tracklet_rejected(self, tmp_path):
        path = tmp_path / "tracklets.jsonl"
        path.write_text(
            '{"format":"signtrack-tracklets","version":1}\n'
            '{"id":-1,"detections":[]}\n'
        )
        with pytest.raises(FormatError, match="line 2"):
            read_tracklets(path)


class TestPredictions:
    def test_round_trip(self, tmp_path):
        preds = [
            SignPrediction(GeoPoint(44.0001, -73.0002), 7, 3, "wavg"),
            SignPrediction(GeoPoint(43.9999, -72.9998), 2, 1, "tri-fallback"),
        ]
        path = tmp_path / "preds.jsonl"
        write_predictions(preds, path)
        assert read_predictions(path) == preds

    def test_empty_round_trip(self, tmp_path):
        path = tmp_path / "preds.jsonl"
        write_predictions([], path)
        assert read_predictions(path) == []

    def test_bad_support_rejected(self, tmp_path):
        path = tmp_path / "preds.jsonl"
        path.write_text(
            '{"format":"signtrack-predictions","version":1}\n'
            '{"class_id":1,"lat_deg":44.0,"lon_deg":-73.0,"method":"foi","support":0}\n'
        )
        with pytest.raises(FormatError, match="line 2"):
            read_predictions(path)


class TestNoiseModel:
    def test_round_trip(self, tmp_path):
        model = NoiseModel([
            NoiseSample(1e-5, -2e-5, True, (0.5, -0.5, 1.0, 0.0)),
            NoiseSample(0.0, 0.0, False, (0.0, 0.0, 0.0, 0.0)),
        ])
        path = tmp_path / "noise.jsonl"
        write_noise_model(model, path)
        loaded = read_noise_model(path)
        assert loaded.samples == model.samples

    def test_empty_model_round_trip(self, tmp_path):
        path = tmp_path / "noise.jsonl"
        write_noise_model(NoiseModel(), path)
        assert read_noise_model(path).samples == []

    def test_malformed_bbox_rejected(self, tmp_path):
        path = tmp_path / "noise.jsonl"
        path.write_text(
            '{"format":"signtrack-noise","version":1}\n'
            '{"class_match":true,"d_bbox":[1,2,3],"d_lat_deg":0,"d_lon_deg":0}\n'
        )
        with pytest.raises(FormatError, match="d_bbox"):
            read_noise_model(path)


class TestPairs:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(33)
        pairs = [
            TrainingPair(
                features=rng.standard_normal(20),
                label=int(rng.integers(2)),
                class_a=int(rng.integers(5)),
                class_b=int(rng.integers(5)),
            )
            for _ in range(8)
        ]
        path = tmp_path / "pairs.npz"
        write_pairs(pairs, path)
        loaded = read_pairs(path)
        assert len(loaded) == 8
        for a, b in zip(pairs, loaded):
            assert np.array_equal(a.features, b.features)
            assert (a.label, a.class_a, a.class_b) == (b.label, b.class_a, b.class_b)

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ValueError):
            write_pairs([], tmp_path / "pairs.npz")

    def test_missing_array_rejected(self, tmp_path):
        path = tmp_path / "pairs.npz"
        with open(path, "wb") as handle:
            np.savez(handle, features=np.zeros((2, 4)))
        with pytest.raises(FormatError, match="missing array"):
            read_pairs(path)


class TestModelFile:
    def build_model(self, with_embedding=True):
        rng = np.random.default_rng(34)
        weights = [rng.standard_normal((6, 4)), rng.standard_normal((4, 1))]
        biases = [rng.standard_normal(4), rng.standard_normal(1)]
        embedding = None
        if with_embedding:
            embedding = ClassEmbedding.from_matrix(
                [1, 5, 9], rng.standard_normal((3, 7)), seed=2
            )
        return MetricModel(weights=weights, biases=biases, embedding=embedding)

    def test_round_trip_bitwise(self, tmp_path):
        model = self.build_model()
        path = tmp_path / "model.bin"
        write_model(model, path)
        loaded = read_model(path)
        for w, lw in zip(model.weights, loaded.weights):
            assert np.array_equal(w, lw)
        for b, lb in zip(model.biases, loaded.biases):
            assert np.array_equal(b, lb)
        assert loaded.embedding.class_ids == (1, 5, 9)
        assert np.array_equal(loaded.embedding.matrix, model.embedding.matrix)
        assert loaded.embedding.seed == 2

    def test_round_trip_without_embedding(self, tmp_path):
        model = self.build_model(with_embedding=False)
        path = tmp_path / "model.bin"
        write_model(model, path)
        assert read_model(path).embedding is None

    def test_write_is_deterministic(self, tmp_path):
        a = tmp_path / "a.bin"
        b = tmp_path / "b.bin"
        write_model(self.build_model(), a)
        write_model(self.build_model(), b)
        assert a.read_bytes() == b.read_bytes()

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "model.bin"
        path.write_bytes(b"NOTMODEL" + b"\x00" * 64)
        with pytest.raises(FormatError, match="magic"):
            read_model(path)

    def test_truncation_rejected(self, tmp_path):
        path = tmp_path / "model.bin"
        write_model(self.build_model(), path)
        blob = path.read_bytes()
        path.write_bytes(blob[:len(blob) - 16])
        with pytest.raises(FormatError, match="truncated|trailing"):
            read_model(path)


class TestReportCsv:
    def test_row_values(self, tmp_path):
        report = MatchReport(tp=1, fn=0, fp=0, gps_errors=[5.0],
                             tp_classes=[(1, 1)])
        path = tmp_path / "report.csv"
        write_report_csv(report, path)
        parsed = read_report_csv(path)
        assert (parsed["tp"], parsed["fn"], parsed["fp"]) == (1, 0, 0)
        assert parsed["mean_error_m"] == pytest.approx(5.0)
        assert parsed["std_error_m"] == pytest.approx(0.0)
        assert parsed["histogram"][5] == 1

    def test_empty_report_header_only(self, tmp_path):
        path = tmp_path / "report.csv"
        write_report_csv(MatchReport(tp=0, fn=0, fp=0), path)
        lines = path.read_text().strip().splitlines()
        assert len(lines) == 1
        assert lines[0].startswith("tp,fn,fp,mean_error_m,std_error_m,hist_00")
        parsed = read_report_csv(path)
        assert parsed["tp"] == 0 and parsed["mean_error_m"] is None

    def test_no_tp_but_counts_has_row(self, tmp_path):
        path = tmp_path / "report.csv"
        write_report_csv(MatchReport(tp=0, fn=2, fp=1), path)
        parsed = read_report_csv(path)
        assert (parsed["tp"], parsed["fn"], parsed["fp"]) == (0, 2, 1)
        assert parsed["mean_error_m"] is None
        assert parsed["histogram"].sum() == 0

    def test_histogram_sums_to_tp(self, tmp_path):
        rng = np.random.default_rng(35)
        errors = list(rng.uniform(0, 14, size=23))
        report = MatchReport(tp=23, fn=2, fp=4, gps_errors=errors,
                             tp_classes=[(0, 0)] * 23)
        path = tmp_path / "report.csv"
        write_report_csv(report, path)
        assert int(read_report_csv(path)["histogram"].sum()) == 23

    def test_bad_header_rejected(self, tmp_path):
        path = tmp_path / "report.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(FormatError, match="header"):
            read_report_csv(path)
