"""Video-level pruning: score every video per class, keep the top-K.

The video model is a multi-label logistic head over mean-pooled frame
features. Candidate segments for a class are all segments enumerated from
that class's top-K videos, which shrinks the (segment, class) space the
pairwise ranker must score while keeping recall high.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .corpus import Corpus, SegmentRef, enumerate_segments, mean_pool
from .linear import MaskedLogisticRegression


@dataclass
class VideoModel:
    """Per-class logistic weights over pooled video features."""

    weights: np.ndarray  # (C x d)
    bias: np.ndarray  # (C,)
    trained_epochs: int
    loss_history: list[float] | None = None  # objective per epoch, not serialized

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError("weights must be (C x d) with a length-C bias")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("model parameters must be finite")

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def to_dict(self) -> dict:
        return {
            "kind": "video_logistic",
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "trained_epochs": self.trained_epochs,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "VideoModel":
        return cls(
            np.asarray(data["weights"], dtype=np.float64),
            np.asarray(data["bias"], dtype=np.float64),
            int(data["trained_epochs"]),
        )


@dataclass
class CandidateSet:
    """Per-class candidate segments drawn from each class's top-K videos."""

    k: int
    selected_videos: dict[int, tuple[str, ...]]  # class -> video ids, rank order
    segments: dict[int, tuple[SegmentRef, ...]]  # class -> segments, (video, start) order
    length: int
    stride: int

    def num_pairs(self) -> int:
        return sum(len(segs) for segs in self.segments.values())

    def contains(self, class_id: int, segment: SegmentRef) -> bool:
        return segment in self._segment_sets().get(class_id, frozenset())

    def _segment_sets(self) -> dict[int, frozenset[SegmentRef]]:
        if not hasattr(self, "_sets"):
            self._sets = {c: frozenset(segs) for c, segs in self.segments.items()}
        return self._sets


def pooled_video_features(corpus: Corpus) -> np.ndarray:
    """(V x d) matrix of mean-pooled frames, rows in corpus video order."""
    return np.vstack([mean_pool(v.frames) for v in corpus.videos.values()])


def train_video_model(
    corpus: Corpus,
    epochs: int,
    learning_rate: float,
    l2: float = 0.0,
    seed: int = 0,
) -> VideoModel:
    """Fit the per-class video scorer on the corpus's video labels.

    Full-batch descent from zero weights is deterministic, so ``seed`` has
    no effect; it is accepted so one seed can be threaded through every
    trainer in a pipeline config.
    """
    del seed
    if not corpus.video_labels:
        raise ValueError("corpus has no video labels")
    # Sort rows by video id so the fit is independent of corpus file order.
    video_ids = sorted(corpus.videos)
    X = np.vstack([mean_pool(corpus.videos[vid].frames) for vid in video_ids])
    row_of = {vid: i for i, vid in enumerate(video_ids)}
    Y = np.full((len(video_ids), corpus.num_classes), np.nan)
    for (vid, class_id), label in corpus.video_labels.items():
        Y[row_of[vid], class_id] = label
    est = MaskedLogisticRegression(epochs=epochs, learning_rate=learning_rate, l2=l2).fit(X, Y)
    return VideoModel(est.weights_, est.bias_, trained_epochs=epochs, loss_history=est.loss_history_)


def predict_video_scores(model: VideoModel, corpus: Corpus) -> np.ndarray:
    """(V x C) class probabilities, rows aligned with ``corpus.video_ids``."""
    if model.dim != corpus.dim:
        raise ValueError(f"model expects d={model.dim}, corpus has d={corpus.dim}")
    X = pooled_video_features(corpus)
    return expit(X @ model.weights.T + model.bias)


def select_candidates(
    scores: np.ndarray,
    corpus: Corpus,
    k: int,
    length: int | None = None,
    stride: int | None = None,
) -> CandidateSet:
    """Per class, keep all segments of the K highest-scoring videos.

    Ties in score break toward the lower video id. K larger than the corpus
    is clamped with a warning.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    video_ids = corpus.video_ids
    scores = np.asarray(scores, dtype=np.float64)
    if scores.shape != (len(video_ids), corpus.num_classes):
        raise ValueError(
            f"scores shape {scores.shape} does not match "
            f"({len(video_ids)}, {corpus.num_classes})"
        )
    if k > len(video_ids):
        warnings.warn(
            f"k={k} exceeds corpus size {len(video_ids)}; clamping", stacklevel=2
        )
        k = len(video_ids)
    length = corpus.segment_length if length is None else length
    stride = length if stride is None else stride

    segments_by_video = {
        vid: tuple(enumerate_segments(corpus.videos[vid], length, stride))
        for vid in video_ids
    }
    ids_arr = np.array(video_ids)
    selected: dict[int, tuple[str, ...]] = {}
    segments: dict[int, tuple[SegmentRef, ...]] = {}
    for c in range(corpus.num_classes):
        order = np.lexsort((ids_arr, -scores[:, c]))
        top = tuple(str(vid) for vid in ids_arr[order[:k]])
        selected[c] = top
        segs = [seg for vid in sorted(top) for seg in segments_by_video[vid]]
        segments[c] = tuple(segs)
    return CandidateSet(k=k, selected_videos=selected, segments=segments, length=length, stride=stride)


def candidate_recall(
    candidates: CandidateSet,
    ground_truth_positives: set[tuple[SegmentRef, int]],
) -> tuple[dict[int, float], float]:
    """Fraction of true positives covered per class, and their mean.

    Classes with no positives are excluded from both outputs.
    """
    if not ground_truth_positives:
        raise ValueError("ground truth is empty")
    by_class: dict[int, set[SegmentRef]] = {}
    for seg, c in ground_truth_positives:
        by_class.setdefault(c, set()).add(seg)
    per_class: dict[int, float] = {}
    for c in sorted(by_class):
        positives = by_class[c]
        covered = candidates._segment_sets().get(c, frozenset())
        per_class[c] = len(positives & covered) / len(positives)
    mean = math.fsum(per_class.values()) / len(per_class)
    return per_class, mean
