import numpy as np
import pytest

from signtrack.geodesy import CameraPose, GeoPoint, move
from signtrack.similarity import BoundingBox, Detection, build_detection_snapshot
from signtrack.tracker import (
    ActiveTrack,
    BaselineScorer,
    ModelScorer,
    TrackerConfig,
    Tracklet,
    step_frame,
    track_segment,
)

ORIGIN = GeoPoint(44.0, -73.0)


def det(frame, gps, class_id=1, conf=0.9, box=(900, 400, 1000, 500)):
    camera = CameraPose(move(ORIGIN, 0.0, 8.0 * frame), 0.0)
    return Detection(
        frame_index=frame,
        bbox=BoundingBox(*box),
        class_id=class_id,
        confidence=conf,
        predicted_gps=gps,
        camera=camera,
    )


def constant_scorer(value):
    return lambda a, b, ga, gb: value


class TestTracklet:
    def test_invariants(self):
        t = Tracklet(0, [det(0, ORIGIN)])
        assert len(t) == 1
        t.append(det(1, ORIGIN))
        assert t.last.frame_index == 1

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            Tracklet(0, [])

    def test_rejects_nonincreasing_frames(self):
        with pytest.raises(ValueError):
            Tracklet(0, [det(2, ORIGIN), det(2, ORIGIN)])
        t = Tracklet(0, [det(3, ORIGIN)])
        with pytest.raises(ValueError):
            t.append(det(3, ORIGIN))

    def test_rejects_negative_id(self):
        with pytest.raises(ValueError):
            Tracklet(-1, [det(0, ORIGIN)])


class TestTrackerConfig:
    def test_defaults(self):
        cfg = TrackerConfig()
        assert cfg.threshold == 0.7
        assert cfg.max_gap == 0
        assert isinstance(cfg.scorer, BaselineScorer)

    def test_validation(self):
        with pytest.raises(ValueError):
            TrackerConfig(threshold=0.0)
        with pytest.raises(ValueError):
            TrackerConfig(threshold=1.0)
        with pytest.raises(ValueError):
            TrackerConfig(max_gap=-1)


class TestStepFrame:
    def test_no_active_all_detections_open_tracklets(self):
        dets = [det(0, ORIGIN), det(0, move(ORIGIN, 90.0, 50.0))]
        grid = build_detection_snapshot(dets, (1920, 1080))
        extended, new, closed = step_frame([], dets, TrackerConfig(), grid)
        assert extended == [] and closed == []
        assert [t.tracklet.id for t in new] == [0, 1]

    def test_id_start_offsets_new_ids(self):
        dets = [det(0, ORIGIN)]
        grid = build_detection_snapshot(dets, (1920, 1080))
        _, new, _ = step_frame([], dets, TrackerConfig(), grid, id_start=7)
        assert new[0].tracklet.id == 7

    def test_no_detections_ages_and_closes(self):
        grid = build_detection_snapshot([], (1920, 1080))
        fresh = ActiveTrack(Tracklet(0, [det(0, ORIGIN)]), 0, grid)
        spared = ActiveTrack(Tracklet(1, [det(0, ORIGIN)]), 0, grid)
        cfg = TrackerConfig(max_gap=0)
        extended, new, closed = step_frame([fresh], [], cfg, grid)
        assert extended == [] and new == []
        assert [t.id for t in closed] == [0]

        cfg_gap = TrackerConfig(max_gap=1)
        extended, new, closed = step_frame([spared], [], cfg_gap, grid)
        assert closed == []
        assert extended[0].misses == 1

    def test_block_diagonal_extends_in_order(self):
        a_gps = ORIGIN
        b_gps = move(ORIGIN, 90.0, 100.0)
        grid0 = build_detection_snapshot([], (1920, 1080))
        active = [
            ActiveTrack(Tracklet(0, [det(0, a_gps)]), 0, grid0),
            ActiveTrack(Tracklet(1, [det(0, b_gps)]), 0, grid0),
        ]
        dets = [det(1, a_gps), det(1, b_gps)]
        grid1 = build_detection_snapshot(dets, (1920, 1080))
        extended, new, closed = step_frame(active, dets, TrackerConfig(), grid1)
        assert new == [] and closed == []
        assert len(extended[0].tracklet) == 2
        assert len(extended[1].tracklet) == 2
        assert extended[0].tracklet.last.predicted_gps == a_gps
        assert extended[1].tracklet.last.predicted_gps == b_gps


class TestTrackSegment:
    def test_single_sign_single_tracklet(self):
        frames = [[det(k, ORIGIN)] for k in range(5)]
        tracklets = track_segment(frames, TrackerConfig())
        assert len(tracklets) == 1
        assert len(tracklets[0]) == 5

    def test_two_distant_signs_two_tracklets(self):
        a_gps = ORIGIN
        b_gps = move(ORIGIN, 90.0, 100.0)
        frames = [[det(k, a_gps), det(k, b_gps, box=(200, 400, 300, 500))]
                  for k in range(4)]
        tracklets = track_segment(frames, TrackerConfig())
        assert len(tracklets) == 2
        for t in tracklets:
            gps = {(d.predicted_gps.lat_deg, d.predicted_gps.lon_deg) for d in t.detections}
            assert len(gps) == 1

    def test_all_scores_one_splits_everything(self):
        frames = [[det(k, ORIGIN)] for k in range(4)]
        cfg = TrackerConfig(scorer=constant_scorer(1.0 - 1e-9))
        tracklets = track_segment(frames, cfg)
        assert len(tracklets) == 4
        assert all(len(t) == 1 for t in tracklets)

    def test_empty_segment(self):
        assert track_segment([], TrackerConfig()) == []
        assert track_segment([[], [], []], TrackerConfig()) == []

    def test_partition_property(self):
        rng = np.random.default_rng(33)
        frames = []
        for k in range(6):
            dets = [
                det(k, move(ORIGIN, rng.uniform(0, 360), rng.uniform(0, 200)),
                    class_id=int(rng.integers(3)))
                for _ in range(rng.integers(0, 5))
            ]
            frames.append(dets)
        tracklets = track_segment(frames, TrackerConfig())
        tracked = [d for t in tracklets for d in t.detections]
        original = [d for f in frames for d in f]
        assert len(tracked) == len(original)
        assert {id(d) for d in tracked} == {id(d) for d in original}

    def test_determinism(self):
        rng = np.random.default_rng(34)
        frames = []
        for k in range(5):
            frames.append([
                det(k, move(ORIGIN, rng.uniform(0, 360), rng.uniform(0, 100)))
                for _ in range(3)
            ])
        first = track_segment(frames, TrackerConfig())
        second = track_segment(frames, TrackerConfig())
        assert [[d.frame_index for d in t.detections] for t in first] == \
               [[d.frame_index for d in t.detections] for t in second]
        assert [t.id for t in first] == [t.id for t in second]

    def test_lower_threshold_never_fewer_tracklets(self):
        rng = np.random.default_rng(35)
        frames = []
        for k in range(5):
            frames.append([
                det(k, move(ORIGIN, rng.uniform(0, 360), rng.uniform(0, 60)))
                for _ in range(3)
            ])
        counts = [
            len(track_segment(frames, TrackerConfig(threshold=th)))
            for th in (0.9, 0.7, 0.5, 0.3, 0.1)
        ]
        assert all(b >= a for a, b in zip(counts, counts[1:]))

    def test_max_gap_bridges_missed_frame(self):
        present = [det(0, ORIGIN), det(1, ORIGIN), det(3, ORIGIN), det(4, ORIGIN)]
        frames = [[present[0]], [present[1]], [], [present[2]], [present[3]]]
        strict = track_segment(frames, TrackerConfig(max_gap=0))
        assert len(strict) == 2
        bridged = track_segment(frames, TrackerConfig(max_gap=1))
        assert len(bridged) == 1
        assert [d.frame_index for d in bridged[0].detections] == [0, 1, 3, 4]

    def test_tracklet_ids_are_creation_ordered(self):
        frames = [
            [det(0, ORIGIN)],
            [det(1, ORIGIN), det(1, move(ORIGIN, 90.0, 80.0), box=(100, 400, 200, 500))],
        ]
        tracklets = track_segment(frames, TrackerConfig())
        assert [t.id for t in tracklets] == [0, 1]
        assert len(tracklets[0]) == 2

    def test_scorer_failure_propagates(self):
        def broken(a, b, ga, gb):
            raise RuntimeError("scorer exploded")

        frames = [[det(0, ORIGIN)], [det(1, ORIGIN)]]
        with pytest.raises(RuntimeError, match="scorer exploded"):
            track_segment(frames, TrackerConfig(scorer=broken))


class TestModelScorer:
    def test_requires_embedding(self):
        from signtrack.similarity import MetricModel

        with pytest.raises(ValueError):
            ModelScorer(MetricModel.zeros())

    def test_zero_model_scores_half(self):
        from signtrack.similarity import ClassEmbedding, MetricModel

        scorer = ModelScorer(MetricModel.zeros(), ClassEmbedding([1]))
        a, b = det(0, ORIGIN), det(1, ORIGIN)
        grid = build_detection_snapshot([a], (1920, 1080))
        assert scorer(a, b, grid, grid) == 0.5
