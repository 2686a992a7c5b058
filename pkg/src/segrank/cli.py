"""Command-line interface: each pipeline stage standalone, plus `run`.

Subcommands: generate, train-video, candidates, build-features, train-ccrl,
train-baseline, predict, evaluate, run. Every command exits 0 on success
and nonzero with a stage-tagged message on stderr otherwise.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import storage
from .boosting import GbmHyper
from .candidates import VideoModel, predict_video_scores, select_candidates, train_video_model
from .corpus import load_corpus, save_corpus
from .evaluation import DEFAULT_CAP, evaluate
from .features import LabeledStore, build_pair_rows, build_training_rows_keyed
from .pipeline import PipelineConfig, PipelineStageError, run_pipeline, score_rows
from .relevance import train_baseline, train_gbm
from .synthetic import GeneratorSpec, generate


def _add_corpus_args(parser: argparse.ArgumentParser):
    parser.add_argument("--videos", required=True, help="videos JSON-lines file")
    parser.add_argument("--video-labels", required=True, help="video labels CSV")
    parser.add_argument("--segment-labels", required=True, help="segment labels CSV")
    parser.add_argument("--num-classes", type=int, required=True)
    parser.add_argument("--segment-length", type=int, default=5)


def _load_corpus(args):
    return load_corpus(
        args.videos,
        args.video_labels,
        args.segment_labels,
        args.num_classes,
        args.segment_length,
    )


def cmd_generate(args) -> int:
    spec = GeneratorSpec(
        num_videos=args.num_videos,
        frames_per_video=args.frames_per_video,
        d=args.dim,
        num_classes=args.num_classes,
        clusters=args.clusters,
        noise_sigma=args.noise_sigma,
        positive_segment_rate=args.positive_rate,
        label_rate=args.label_rate,
        seed=args.seed,
        segment_length=args.segment_length,
    )
    corpus, truth = generate(spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_corpus(
        corpus,
        out / "videos.jsonl",
        out / "video_labels.csv",
        out / "segment_labels.csv",
    )
    storage.write_ground_truth_csv(out / "ground_truth.csv", truth.positive_pairs())
    print(
        f"generated {len(corpus.videos)} videos, {len(corpus.segment_labels)} segment labels, "
        f"{len(truth.positive_pairs())} ground-truth positives -> {out}"
    )
    return 0


def cmd_train_video(args) -> int:
    corpus = _load_corpus(args)
    model = train_video_model(
        corpus, epochs=args.epochs, learning_rate=args.lr, l2=args.l2, seed=args.seed
    )
    storage.write_model(args.out, model)
    print(f"video model: {model.num_classes} classes x {model.dim} dims -> {args.out}")
    return 0


def cmd_candidates(args) -> int:
    corpus = _load_corpus(args)
    model = storage.read_model(args.model)
    if not isinstance(model, VideoModel):
        raise ValueError(f"{args.model} is not a video model")
    scores = predict_video_scores(model, corpus)
    candidate_set = select_candidates(scores, corpus, args.k, args.length, args.stride)
    storage.write_candidates_csv(args.out, candidate_set)
    print(f"candidates: {candidate_set.num_pairs()} (segment, class) pairs -> {args.out}")
    return 0


def cmd_build_features(args) -> int:
    if (args.candidates is None) == (not args.training):
        raise ValueError("pass exactly one of --candidates or --training")
    corpus = _load_corpus(args)
    model = storage.read_model(args.video_model)
    if not isinstance(model, VideoModel):
        raise ValueError(f"{args.video_model} is not a video model")
    scores = predict_video_scores(model, corpus)
    store = LabeledStore.from_corpus(corpus)
    if args.training:
        keyed = build_training_rows_keyed(corpus, store, scores)
        storage.write_features_csv(
            args.out,
            [(seg, class_id, row) for seg, class_id, row, _ in keyed],
            [label for _, _, _, label in keyed],
        )
    else:
        candidate_set = storage.read_candidates_csv(args.candidates)
        rows = build_pair_rows(candidate_set, scores, store, corpus)
        storage.write_features_csv(args.out, rows)
    print(f"feature rows -> {args.out}")
    return 0


def cmd_train_ccrl(args) -> int:
    keyed_rows, labels = storage.read_features_csv(args.features)
    if labels is None:
        raise ValueError(f"{args.features} has no label column; build with --training")
    hyper = GbmHyper(
        rounds=args.rounds,
        max_depth=args.depth,
        learning_rate=args.lr,
        reg_lambda=args.reg_lambda,
        min_child_weight=args.min_child_weight,
        seed=args.seed,
    )
    model = train_gbm([row for _, _, row in keyed_rows], labels, hyper)
    storage.write_model(args.out, model)
    print(f"relevance model: {len(model.trees)} trees -> {args.out}")
    return 0


def cmd_train_baseline(args) -> int:
    corpus = _load_corpus(args)
    model = train_baseline(
        corpus, epochs=args.epochs, learning_rate=args.lr, l2=args.l2, seed=args.seed
    )
    storage.write_model(args.out, model)
    print(f"baseline model -> {args.out}")
    return 0


def cmd_predict(args) -> int:
    keyed_rows, _ = storage.read_features_csv(args.features)
    model = storage.read_model(args.model)
    if isinstance(model, VideoModel):
        raise ValueError(f"{args.model} is a video model; pass a relevance model")
    predictions = score_rows(model, keyed_rows)
    storage.write_predictions_csv(args.out, predictions)
    print(f"predictions for {sum(len(v) for v in predictions.values())} pairs -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    predictions = storage.read_predictions_csv(args.predictions)
    ground_truth = storage.read_ground_truth_csv(args.ground_truth)
    known_videos = None
    if args.videos is not None:
        known_videos = set()
        with open(args.videos, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    known_videos.add(json.loads(line)["id"])
    report = evaluate(
        predictions, ground_truth, args.num_classes, cap=args.cap, known_videos=known_videos
    )
    storage.write_json(args.out, report.to_dict())
    print(f"mAP {report.mean_ap:.6f} over {len(report.per_class_ap)} classes -> {args.out}")
    return 0


def cmd_run(args) -> int:
    config_data = storage.read_json(args.config)
    if args.out_dir is not None:
        config_data["out_dir"] = args.out_dir
    if args.mode is not None:
        config_data["mode"] = args.mode
    config = PipelineConfig.from_dict(config_data)
    if args.seed is not None:
        config = config.with_seed(args.seed)
    report = run_pipeline(config)
    print(f"mAP {report.mean_ap:.6f} over {len(report.per_class_ap)} classes -> {config.out_dir}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="segrank",
        description="Two-stage temporal concept localization on frame-feature corpora",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic corpus and its ground truth")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--num-videos", type=int, default=500)
    p.add_argument("--frames-per-video", type=int, default=25)
    p.add_argument("--dim", type=int, default=16)
    p.add_argument("--num-classes", type=int, default=20)
    p.add_argument("--clusters", type=int, default=5)
    p.add_argument("--noise-sigma", type=float, default=0.3)
    p.add_argument("--positive-rate", type=float, default=0.3)
    p.add_argument("--label-rate", type=float, default=0.25)
    p.add_argument("--segment-length", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(handler=cmd_generate, stage="generate")

    p = sub.add_parser("train-video", help="fit the video-level class scorer")
    _add_corpus_args(p)
    p.add_argument("--epochs", type=int, default=3000)
    p.add_argument("--lr", type=float, default=20.0)
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_train_video, stage="train-video")

    p = sub.add_parser("candidates", help="select per-class top-K video segments")
    _add_corpus_args(p)
    p.add_argument("--model", required=True, help="video model JSON")
    p.add_argument("--k", type=int, default=10)
    p.add_argument("--length", type=int, default=5)
    p.add_argument("--stride", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_candidates, stage="candidates")

    p = sub.add_parser("build-features", help="assemble (segment, class) feature rows")
    _add_corpus_args(p)
    p.add_argument("--video-model", required=True)
    p.add_argument("--candidates", help="candidates CSV (for scoring rows)")
    p.add_argument("--training", action="store_true", help="build labelled training rows")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_build_features, stage="build-features")

    p = sub.add_parser("train-ccrl", help="fit the pairwise relevance booster")
    p.add_argument("--features", required=True, help="labelled feature CSV")
    p.add_argument("--rounds", type=int, default=200)
    p.add_argument("--depth", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.1)
    p.add_argument("--lambda", dest="reg_lambda", type=float, default=1.0)
    p.add_argument("--min-child-weight", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_train_ccrl, stage="train-ccrl")

    p = sub.add_parser("train-baseline", help="fit the per-class logistic baseline")
    _add_corpus_args(p)
    p.add_argument("--epochs", type=int, default=3000)
    p.add_argument("--lr", type=float, default=20.0)
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_train_baseline, stage="train-baseline")

    p = sub.add_parser("predict", help="score feature rows with a relevance model")
    p.add_argument("--features", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_predict, stage="predict")

    p = sub.add_parser("evaluate", help="mAP and recall against ground truth")
    p.add_argument("--predictions", required=True)
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--num-classes", type=int, required=True)
    p.add_argument("--cap", type=int, default=DEFAULT_CAP)
    p.add_argument("--videos", help="optional videos JSONL to validate prediction ids")
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(handler=cmd_evaluate, stage="evaluate")

    p = sub.add_parser("run", help="run the full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, help="override every stage's seed")
    p.add_argument("--mode", choices=["with_cg", "without_cg"])
    p.add_argument("--out-dir")
    p.set_defaults(handler=cmd_run, stage="run")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except PipelineStageError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 1
    except Exception as exc:
        print(f"error [{args.stage}] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
