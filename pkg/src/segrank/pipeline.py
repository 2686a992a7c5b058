"""End-to-end orchestration of the two-stage localization pipeline.

Stages: obtain a corpus (generate or load) -> train the video-level scorer
-> select per-class candidate videos -> build labelled training rows and
candidate feature rows -> train the relevance scorer -> score candidates ->
rank and evaluate. Every stage writes its artifact before the next one
runs, so any stage can be re-run standalone from disk; errors carry the
stage name. In ``without_cg`` mode the candidate stage keeps every video
(K = V), so the scorer must rank every (segment, class) pair.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import storage
from .boosting import GbmHyper, GbmModel
from .candidates import predict_video_scores, select_candidates, train_video_model
from .corpus import SegmentRef, load_corpus, save_corpus
from .evaluation import DEFAULT_CAP, EvalReport, evaluate
from .features import LabeledStore, build_pair_rows, build_training_rows_keyed, rows_to_matrix
from .relevance import BaselineModel, train_baseline, train_gbm
from .synthetic import GeneratorSpec, generate


class PipelineStageError(RuntimeError):
    """Failure inside one pipeline stage, tagged with the stage name."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage


@dataclass
class LogisticHyper:
    # The masked objective averages over all labelled pairs, which scales
    # per-class gradients down by ~C; the default rate compensates.
    epochs: int = 3000
    learning_rate: float = 20.0
    l2: float = 0.0


@dataclass
class PipelineConfig:
    out_dir: str
    generator: GeneratorSpec | None = None
    corpus_paths: dict | None = None  # videos/video_labels/segment_labels/ground_truth/num_classes
    mode: str = "with_cg"
    model: str = "gbm"
    seed: int = 0
    k: int = 10
    segment_length: int = 5
    stride: int = 5
    cap: int = DEFAULT_CAP
    video_hyper: LogisticHyper = field(default_factory=LogisticHyper)
    gbm_hyper: GbmHyper = field(default_factory=GbmHyper)
    baseline_hyper: LogisticHyper = field(default_factory=LogisticHyper)

    def __post_init__(self):
        if self.mode not in ("with_cg", "without_cg"):
            raise ValueError(f"mode must be with_cg or without_cg, got {self.mode!r}")
        if self.model not in ("gbm", "baseline"):
            raise ValueError(f"model must be gbm or baseline, got {self.model!r}")
        if (self.generator is None) == (self.corpus_paths is None):
            raise ValueError("exactly one of generator or corpus_paths must be given")

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        data = dict(data)
        generator = data.pop("generator", None)
        if generator is not None:
            generator = GeneratorSpec(**generator)
        video_hyper = LogisticHyper(**data.pop("video_model", {}))
        gbm_hyper = GbmHyper(**data.pop("gbm", {}))
        baseline_hyper = LogisticHyper(**data.pop("baseline", {}))
        return cls(
            out_dir=data.pop("out_dir"),
            generator=generator,
            corpus_paths=data.pop("corpus", None),
            video_hyper=video_hyper,
            gbm_hyper=gbm_hyper,
            baseline_hyper=baseline_hyper,
            **data,
        )

    def with_seed(self, seed: int) -> "PipelineConfig":
        """Propagate one seed into the generator and every trainer."""
        generator = self.generator
        if generator is not None:
            generator = GeneratorSpec(
                **{**generator.__dict__, "seed": seed}
            )
        gbm = GbmHyper(**{**self.gbm_hyper.__dict__, "seed": seed})
        return PipelineConfig(
            out_dir=self.out_dir,
            generator=generator,
            corpus_paths=self.corpus_paths,
            mode=self.mode,
            model=self.model,
            seed=seed,
            k=self.k,
            segment_length=self.segment_length,
            stride=self.stride,
            cap=self.cap,
            video_hyper=self.video_hyper,
            gbm_hyper=gbm,
            baseline_hyper=self.baseline_hyper,
        )


def _stage(name: str):
    def wrap(fn, *args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except PipelineStageError:
            raise
        except Exception as exc:
            raise PipelineStageError(name, exc) from exc

    return wrap


def score_rows(
    model: GbmModel | BaselineModel,
    keyed_rows: list[tuple[SegmentRef, int, object]],
) -> dict[int, list[tuple[SegmentRef, float]]]:
    """Relevance probability for every keyed feature row, grouped by class."""
    rows = [row for _, _, row in keyed_rows]
    if isinstance(model, GbmModel):
        probs = model.predict_proba_positive(rows_to_matrix(rows))
    else:
        encodings = np.vstack([row.encoding for row in rows])
        matrix = model.predict_matrix(encodings)
        probs = matrix[np.arange(len(rows)), [row.class_id for row in rows]]
    scored: dict[int, list[tuple[SegmentRef, float]]] = {}
    for (seg, class_id, _), p in zip(keyed_rows, probs):
        scored.setdefault(class_id, []).append((seg, float(p)))
    return scored


def run_pipeline(config: PipelineConfig) -> EvalReport:
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    config = config.with_seed(config.seed)

    if config.generator is not None:
        corpus, truth = _stage("generate")(generate, config.generator)
        _stage("generate")(
            save_corpus,
            corpus,
            out / "videos.jsonl",
            out / "video_labels.csv",
            out / "segment_labels.csv",
        )
        ground_truth = truth.positive_pairs()
        _stage("generate")(storage.write_ground_truth_csv, out / "ground_truth.csv", ground_truth)
    else:
        paths = config.corpus_paths
        corpus = _stage("load-corpus")(
            load_corpus,
            paths["videos"],
            paths["video_labels"],
            paths["segment_labels"],
            int(paths["num_classes"]),
            config.segment_length,
        )
        ground_truth = _stage("load-corpus")(storage.read_ground_truth_csv, paths["ground_truth"])

    video_model = _stage("train-video")(
        train_video_model,
        corpus,
        epochs=config.video_hyper.epochs,
        learning_rate=config.video_hyper.learning_rate,
        l2=config.video_hyper.l2,
        seed=config.seed,
    )
    _stage("train-video")(storage.write_model, out / "video_model.json", video_model)

    scores = _stage("candidates")(predict_video_scores, video_model, corpus)
    k = config.k if config.mode == "with_cg" else len(corpus.videos)
    candidate_set = _stage("candidates")(
        select_candidates, scores, corpus, k, config.segment_length, config.stride
    )
    _stage("candidates")(storage.write_candidates_csv, out / "candidates.csv", candidate_set)

    store = _stage("build-features")(LabeledStore.from_corpus, corpus)
    training = _stage("build-features")(build_training_rows_keyed, corpus, store, scores)
    candidate_rows = _stage("build-features")(
        build_pair_rows, candidate_set, scores, store, corpus
    )
    _stage("build-features")(
        storage.write_features_csv,
        out / "train_features.csv",
        [(seg, class_id, row) for seg, class_id, row, _ in training],
        [label for _, _, _, label in training],
    )
    _stage("build-features")(
        storage.write_features_csv, out / "candidate_features.csv", candidate_rows
    )

    if config.model == "gbm":
        scorer = _stage("train-ccrl")(
            train_gbm,
            [row for _, _, row, _ in training],
            [label for _, _, _, label in training],
            config.gbm_hyper,
        )
        _stage("train-ccrl")(storage.write_model, out / "relevance_model.json", scorer)
    else:
        scorer = _stage("train-baseline")(
            train_baseline,
            corpus,
            epochs=config.baseline_hyper.epochs,
            learning_rate=config.baseline_hyper.learning_rate,
            l2=config.baseline_hyper.l2,
            seed=config.seed,
        )
        _stage("train-baseline")(storage.write_model, out / "relevance_model.json", scorer)

    predictions = _stage("predict")(score_rows, scorer, candidate_rows)
    _stage("predict")(storage.write_predictions_csv, out / "predictions.csv", predictions)

    report = _stage("evaluate")(
        evaluate,
        predictions,
        ground_truth,
        corpus.num_classes,
        config.cap,
        set(corpus.videos),
    )
    _stage("evaluate")(storage.write_json, out / "report.json", report.to_dict())
    return report
