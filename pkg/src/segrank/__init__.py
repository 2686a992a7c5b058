"""Two-stage temporal concept localization.

Stage one prunes the search space per class with a video-level scorer;
stage two ranks the surviving (segment, class) pairs with one shared
boosted-tree relevance model fed class-conditioned similarity features.
"""

from .boosting import GbmHyper, GbmModel, NewtonBoostingClassifier
from .candidates import (
    CandidateSet,
    VideoModel,
    candidate_recall,
    predict_video_scores,
    select_candidates,
    train_video_model,
)
from .corpus import (
    Corpus,
    CorpusError,
    SegmentRef,
    Video,
    enumerate_segments,
    load_corpus,
    mean_pool,
    save_corpus,
    segment_encoding,
)
from .evaluation import (
    EvalReport,
    RankedList,
    average_precision,
    evaluate,
    mean_average_precision,
    rank_segments,
)
from .features import (
    LabeledStore,
    PairFeatureRow,
    build_pair_rows,
    build_training_rows,
    cosine_similarity,
    sim_features,
)
from .linear import MaskedLogisticRegression
from .pipeline import PipelineConfig, run_pipeline
from .relevance import (
    BaselineModel,
    bce_loss,
    ensemble_average,
    predict_gbm,
    train_baseline,
    train_gbm,
)
from .synthetic import GeneratorSpec, GroundTruth, generate

__version__ = "0.1.0"

__all__ = [
    "BaselineModel",
    "CandidateSet",
    "Corpus",
    "CorpusError",
    "EvalReport",
    "GbmHyper",
    "GbmModel",
    "GeneratorSpec",
    "GroundTruth",
    "LabeledStore",
    "MaskedLogisticRegression",
    "NewtonBoostingClassifier",
    "PairFeatureRow",
    "PipelineConfig",
    "RankedList",
    "SegmentRef",
    "Video",
    "VideoModel",
    "average_precision",
    "bce_loss",
    "build_pair_rows",
    "build_training_rows",
    "candidate_recall",
    "cosine_similarity",
    "ensemble_average",
    "enumerate_segments",
    "evaluate",
    "generate",
    "load_corpus",
    "mean_average_precision",
    "mean_pool",
    "predict_gbm",
    "predict_video_scores",
    "rank_segments",
    "run_pipeline",
    "save_corpus",
    "segment_encoding",
    "select_candidates",
    "sim_features",
    "train_baseline",
    "train_gbm",
    "train_video_model",
]
