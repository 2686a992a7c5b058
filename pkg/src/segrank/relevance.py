"""Segment-to-class relevance scorers.

Two arms: the boosted pairwise model, which scores any (segment, class)
feature row with one shared ensemble, and the per-class logistic baseline,
which learns an independent head per class over segment encodings and so
only updates a class's weights when that class's labels appear. A simple
averaging combiner merges aligned score lists from multiple scorers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np
from scipy.special import expit

from .boosting import GbmHyper, GbmModel, NewtonBoostingClassifier
from .corpus import Corpus, segment_encoding
from .features import CLASS_FEATURE_INDEX, PairFeatureRow, rows_to_matrix
from .linear import MaskedLogisticRegression

PROB_EPS = 1e-12


def bce_loss(predictions: Sequence[float], labels: Sequence[float]) -> float:
    """Mean binary cross entropy between probabilities and binary labels.

    Probabilities are clamped to [1e-12, 1 - 1e-12] inside the loss only, so
    perfect predictions score exactly 0 while logs stay finite.
    """
    p = np.asarray(predictions, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    if p.shape != y.shape or p.ndim != 1:
        raise ValueError(f"length mismatch: {p.shape} vs {y.shape}")
    if p.size == 0:
        raise ValueError("empty inputs")
    p = np.clip(p, PROB_EPS, 1.0 - PROB_EPS)
    per_row = -(y * np.log(p) + (1.0 - y) * np.log(1.0 - p))
    return float(per_row.mean())


def train_gbm(
    rows: list[PairFeatureRow],
    labels: Sequence[int],
    hyper: GbmHyper,
) -> GbmModel:
    """Fit the pairwise relevance ensemble on labelled feature rows."""
    X = rows_to_matrix(rows)
    est = NewtonBoostingClassifier(
        rounds=hyper.rounds,
        max_depth=hyper.max_depth,
        learning_rate=hyper.learning_rate,
        reg_lambda=hyper.reg_lambda,
        min_child_weight=hyper.min_child_weight,
        categorical_features=(CLASS_FEATURE_INDEX,),
        seed=hyper.seed,
    ).fit(X, np.asarray(labels))
    model = est.model_
    model.train_losses = est.train_losses_
    return model


def predict_gbm(model: GbmModel, row: PairFeatureRow) -> float:
    """Relevance probability for one (segment, class) feature row."""
    return float(model.predict_proba_positive(row.to_vector()[None, :])[0])


@dataclass
class BaselineModel:
    """Independent logistic head per class over segment encodings."""

    weights: np.ndarray  # (C x d)
    bias: np.ndarray  # (C,)
    trained_epochs: int

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("model parameters must be finite")

    def predict_matrix(self, encodings: np.ndarray) -> np.ndarray:
        """(n x C) probabilities for every class on each encoding."""
        encodings = np.asarray(encodings, dtype=np.float64)
        return expit(encodings @ self.weights.T + self.bias)

    def predict_pair(self, encoding: np.ndarray, class_id: int) -> float:
        return float(self.predict_matrix(np.asarray(encoding)[None, :])[0, class_id])

    def to_dict(self) -> dict:
        return {
            "kind": "per_class_logistic",
            "weights": self.weights.tolist(),
            "bias": self.bias.tolist(),
            "trained_epochs": self.trained_epochs,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BaselineModel":
        return cls(
            np.asarray(data["weights"], dtype=np.float64),
            np.asarray(data["bias"], dtype=np.float64),
            int(data["trained_epochs"]),
        )


def train_baseline(
    corpus: Corpus,
    epochs: int,
    learning_rate: float,
    l2: float = 0.0,
    seed: int = 0,
) -> BaselineModel:
    """Fit the per-class heads on the corpus's segment labels.

    A class with no labels keeps its zero-initialized head (and so predicts
    0.5 everywhere). Deterministic; ``seed`` is config plumbing only.
    """
    del seed
    if not corpus.segment_labels:
        raise ValueError("corpus has no segment labels")
    segments = sorted({seg for seg, _ in corpus.segment_labels})
    row_of = {seg: i for i, seg in enumerate(segments)}
    X = np.vstack([segment_encoding(corpus, seg) for seg in segments])
    Y = np.full((len(segments), corpus.num_classes), np.nan)
    for (seg, class_id), label in corpus.segment_labels.items():
        Y[row_of[seg], class_id] = label
    est = MaskedLogisticRegression(epochs=epochs, learning_rate=learning_rate, l2=l2).fit(X, Y)
    model = BaselineModel(est.weights_, est.bias_, trained_epochs=epochs)
    model.loss_history = est.loss_history_
    return model


def ensemble_average(
    score_lists: Sequence[Sequence[tuple[Hashable, float]]],
) -> list[tuple[Hashable, float]]:
    """Element-wise mean of score lists aligned on identical key sequences."""
    if not score_lists:
        raise ValueError("need at least one score list")
    reference = [key for key, _ in score_lists[0]]
    for i, scored in enumerate(score_lists[1:], start=2):
        keys = [key for key, _ in scored]
        if keys != reference:
            raise ValueError(f"score list {i} is not aligned with the first list")
    n = len(score_lists)
    return [
        (key, math.fsum(scored[i][1] for scored in score_lists) / n)
        for i, key in enumerate(reference)
    ]
