"""Command-line front end for the sign-mapping pipeline.

Each subcommand wraps one pipeline stage around the on-disk formats, so
the full chain is scriptable:

    signtrack simulate --seed 7 --out seg.jsonl --dets dets.jsonl
    signtrack track --dets dets.jsonl --out tracklets.jsonl
    signtrack condense --tracklets tracklets.jsonl --out preds.jsonl
    signtrack evaluate --preds preds.jsonl --truth seg.jsonl --out report.csv

Exit codes: 0 on success, 1 when flags fail validation, 2 when a
command fails at runtime (unreadable file, diverging training, ...).
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import dataio
from .condenser import CONDENSE_METHODS, condense
from .evaluation import (
    ground_truth_from_segment,
    gps_error_stats,
    match_predictions,
)
from .similarity import (
    generate_training_pairs,
    harvest_noise_model,
    train_similarity_model,
)
from .simulator import NoiseConfig, SimConfig, degrade_to_detections, generate_segment
from .tracker import BaselineScorer, ModelScorer, TrackerConfig, track_segment

HISTOGRAM_BAR_WIDTH = 40


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad flags; here that is validation (1)."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> float:
    value = float(text)
    if not value > 0.0:
        raise argparse.ArgumentTypeError(f"must be positive, got {text}")
    return value


def _non_negative(text: str) -> float:
    value = float(text)
    if value < 0.0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return value


def _rate(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {text}")
    return value


def _open_unit(text: str) -> float:
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"must lie in (0, 1), got {text}")
    return value


def _seed(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {text}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="signtrack", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    simulate = sub.add_parser("simulate", help="generate a synthetic segment")
    simulate.add_argument("--seed", type=_seed, required=True)
    simulate.add_argument("--out", required=True, help="segment file to write")
    simulate.add_argument("--dets", help="also write degraded detections here")
    simulate.add_argument("--length", type=_positive, default=400.0)
    simulate.add_argument("--density", type=_non_negative, default=20.0,
                          help="signs per km")
    simulate.add_argument("--turn-rate", type=_non_negative, default=2.0)
    simulate.add_argument("--classes", type=int, default=50)
    simulate.add_argument("--class-exponent", type=_positive, default=1.5)
    simulate.add_argument("--assembly-prob", type=_rate, default=0.0)
    simulate.add_argument("--visibility", type=_positive, default=100.0)
    simulate.add_argument("--spacing", type=_positive, default=8.0)
    simulate.add_argument("--unique-classes", action="store_true")
    simulate.add_argument("--min-sign-spacing", type=_non_negative, default=0.0)
    simulate.add_argument("--gps-sigma", type=_non_negative, default=0.0)
    simulate.add_argument("--class-confusion", type=_rate, default=0.0)
    simulate.add_argument("--bbox-jitter", type=_non_negative, default=0.0)
    simulate.add_argument("--miss-rate", type=_rate, default=0.0)
    simulate.add_argument("--fp-rate", type=_rate, default=0.0)

    harvest = sub.add_parser("harvest-noise",
                             help="compare detections against annotations")
    harvest.add_argument("--segment", required=True)
    harvest.add_argument("--dets", required=True)
    harvest.add_argument("--out", required=True)

    pairs = sub.add_parser("gen-pairs", help="build labeled training pairs")
    pairs.add_argument("--segments", nargs="+", required=True)
    pairs.add_argument("--noise", required=True)
    pairs.add_argument("--out", required=True)
    pairs.add_argument("--seed", type=_seed, default=0)

    train = sub.add_parser("train-metric", help="train the similarity model")
    train.add_argument("--pairs", required=True)
    train.add_argument("--out", required=True)
    train.add_argument("--seed", type=_seed, default=0)

    track = sub.add_parser("track", help="associate detections into tracklets")
    track.add_argument("--dets", required=True)
    track.add_argument("--out", required=True)
    track.add_argument("--model", help="trained metric model; default baseline scorer")
    track.add_argument("--threshold", type=_open_unit, default=0.7)
    track.add_argument("--max-gap", type=_seed, default=0)
    track.add_argument("--min-confidence", type=_rate, default=0.0,
                       help="drop detections below this confidence first")
    track.add_argument("--min-track-length", type=int, default=1,
                       help="discard tracklets with fewer detections than this")

    cond = sub.add_parser("condense", help="collapse tracklets into predictions")
    cond.add_argument("--tracklets", required=True)
    cond.add_argument("--out", required=True)
    cond.add_argument("--method", choices=CONDENSE_METHODS + ("mrf",),
                      default="wavg")

    evaluate = sub.add_parser("evaluate", help="score predictions against truth")
    evaluate.add_argument("--preds", required=True)
    evaluate.add_argument("--truth", required=True, help="ground-truth segment file")
    evaluate.add_argument("--out", required=True, help="report CSV to write")
    evaluate.add_argument("--radius", type=_positive, default=15.0)
    evaluate.add_argument("--require-class-match", action="store_true")

    report = sub.add_parser("report", help="render a report CSV as text")
    report.add_argument("--in", dest="input", required=True)
    return parser


def _cmd_simulate(args) -> int:
    cfg = SimConfig(
        seed=args.seed,
        path_length_m=args.length,
        turn_rate_deg=args.turn_rate,
        sign_density_per_km=args.density,
        class_count=args.classes,
        class_exponent=args.class_exponent,
        assembly_probability=args.assembly_prob,
        visibility_radius_m=args.visibility,
        frame_spacing_m=args.spacing,
        noise=NoiseConfig(
            gps_sigma_m=args.gps_sigma,
            class_confusion_rate=args.class_confusion,
            bbox_jitter_px=args.bbox_jitter,
            miss_rate=args.miss_rate,
            false_positive_rate=args.fp_rate,
        ),
        unique_classes=args.unique_classes,
        min_sign_spacing_m=args.min_sign_spacing,
    )
    segment = generate_segment(cfg)
    dataio.write_segment(segment, args.out)
    signs = {a.sign_id for f in segment.frames for a in f.annotations}
    annotations = sum(len(f.annotations) for f in segment.frames)
    summary = (
        f"segment {segment.segment_id}: {len(segment.frames)} frames, "
        f"{len(signs)} signs, {annotations} annotations -> {args.out}"
    )
    if args.dets:
        detections = degrade_to_detections(
            segment, cfg.noise, np.random.default_rng([cfg.seed, 1]),
            class_count=cfg.class_count,
            visibility_radius_m=cfg.visibility_radius_m,
        )
        dataio.write_detections(
            detections, args.dets, (segment.image_width, segment.image_height)
        )
        summary += f", {sum(len(f) for f in detections)} detections -> {args.dets}"
    print(summary)
    return 0


def _cmd_harvest(args) -> int:
    segment = dataio.read_segment(args.segment)
    detections, _ = dataio.read_detections(args.dets)
    model = harvest_noise_model(
        [f.annotations for f in segment.frames], detections
    )
    dataio.write_noise_model(model, args.out)
    print(
        f"harvested {len(model)} noise samples from "
        f"{len(segment.frames)} frames -> {args.out}"
    )
    return 0


def _cmd_gen_pairs(args) -> int:
    segments = [dataio.read_segment(p) for p in args.segments]
    noise = dataio.read_noise_model(args.noise)
    pairs = generate_training_pairs(segments, noise, np.random.default_rng(args.seed))
    dataio.write_pairs(pairs, args.out)
    different = sum(p.label for p in pairs)
    print(
        f"{len(pairs)} training pairs ({len(pairs) - different} same, "
        f"{different} different) -> {args.out}"
    )
    return 0


def _cmd_train(args) -> int:
    pairs = dataio.read_pairs(args.pairs)
    model = train_similarity_model(pairs, rng=np.random.default_rng(args.seed))
    dataio.write_model(model, args.out)
    sizes = "x".join(str(s) for s in model.layer_sizes)
    print(f"trained metric model on {len(pairs)} pairs ({sizes}) -> {args.out}")
    return 0


def _cmd_track(args) -> int:
    frames, image_size = dataio.read_detections(args.dets)
    if args.min_confidence > 0.0:
        frames = [
            [d for d in frame if d.confidence >= args.min_confidence]
            for frame in frames
        ]
    if args.model:
        scorer = ModelScorer(dataio.read_model(args.model))
    else:
        scorer = BaselineScorer()
    cfg = TrackerConfig(scorer=scorer, threshold=args.threshold, max_gap=args.max_gap)
    tracklets = track_segment(frames, cfg, image_size)
    if args.min_track_length > 1:
        tracklets = [
            t for t in tracklets if len(t.detections) >= args.min_track_length
        ]
    dataio.write_tracklets(tracklets, args.out)
    total = sum(len(f) for f in frames)
    print(
        f"{len(tracklets)} tracklets from {total} detections "
        f"over {len(frames)} frames -> {args.out}"
    )
    return 0


def _cmd_condense(args) -> int:
    tracklets = dataio.read_tracklets(args.tracklets)
    preds = [condense(t, args.method) for t in tracklets]
    dataio.write_predictions(preds, args.out)
    print(f"{len(preds)} predictions via {args.method} -> {args.out}")
    return 0


def _cmd_evaluate(args) -> int:
    preds = dataio.read_predictions(args.preds)
    truth = ground_truth_from_segment(dataio.read_segment(args.truth))
    report = match_predictions(
        preds, truth, radius_m=args.radius,
        require_class_match=args.require_class_match,
    )
    dataio.write_report_csv(report, args.out)
    mean, _, _ = gps_error_stats(report)
    mean_text = "n/a" if mean is None else f"{mean:.3f} m"
    print(
        f"tp={report.tp} fn={report.fn} fp={report.fp} "
        f"mean_error={mean_text} -> {args.out}"
    )
    return 0


def _cmd_report(args) -> int:
    parsed = dataio.read_report_csv(args.input)
    mean = parsed["mean_error_m"]
    std = parsed["std_error_m"]
    mean_text = "n/a" if mean is None else f"{mean:.3f} m"
    std_text = "n/a" if std is None else f"{std:.3f} m"
    print(
        f"tp={parsed['tp']} fn={parsed['fn']} fp={parsed['fp']} "
        f"mean_error={mean_text} std_error={std_text}"
    )
    histogram = parsed["histogram"]
    peak = int(histogram.max())
    if peak > 0:
        print("GPS error histogram (1 m bins):")
        for i, count in enumerate(histogram):
            label = f"{i:2d}-{i + 1:<2d} m" if i < len(histogram) - 1 else "  30+ m"
            bar = "#" * round(HISTOGRAM_BAR_WIDTH * int(count) / peak)
            print(f"  {label} |{bar} {int(count)}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "harvest-noise": _cmd_harvest,
    "gen-pairs": _cmd_gen_pairs,
    "train-metric": _cmd_train,
    "track": _cmd_track,
    "condense": _cmd_condense,
    "evaluate": _cmd_evaluate,
    "report": _cmd_report,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (ValueError, OSError, KeyError, NotImplementedError, RuntimeError) as e:
        print(f"signtrack {args.command}: error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
