"""Class-conditioned features joining a segment to a target class.

For a (segment, class) pair the feature row carries the segment's encoding,
the video-level probability for that pair, the class identity as a single
categorical slot, and similarity aggregates against the class's labelled
exemplars: the summed cosine similarity to labelled positives and to
labelled negatives, each restricted to exemplars from *other* videos so a
training segment never sees its own video's labels, plus the term counts
(raw sums conflate closeness with exemplar count, so both are exposed).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .candidates import CandidateSet
from .corpus import Corpus, SegmentRef, segment_encoding

# Column layout of a feature vector: the class slot is categorical, the rest
# numeric, followed by the d encoding dims.
CLASS_FEATURE_INDEX = 0
_LEAD_COLUMNS = ["class_id", "candidate_score", "sim_pos", "sim_neg", "pos_count", "neg_count"]
NUM_EXTRA_FEATURES = len(_LEAD_COLUMNS)


def feature_names(d: int) -> list[str]:
    return _LEAD_COLUMNS + [f"enc_{i}" for i in range(d)]


@dataclass
class PairFeatureRow:
    """Model input for one (segment, class) pair."""

    encoding: np.ndarray
    candidate_score: float
    class_id: int
    sim_pos: float
    sim_neg: float
    pos_count: int
    neg_count: int

    def to_vector(self) -> np.ndarray:
        head = [
            float(self.class_id),
            self.candidate_score,
            self.sim_pos,
            self.sim_neg,
            float(self.pos_count),
            float(self.neg_count),
        ]
        return np.concatenate([head, self.encoding])


def rows_to_matrix(rows: list[PairFeatureRow]) -> np.ndarray:
    if not rows:
        raise ValueError("no feature rows")
    return np.vstack([row.to_vector() for row in rows])


@dataclass(frozen=True)
class ClassExemplars:
    """Labelled segment encodings of one polarity for one class."""

    video_ids: tuple[str, ...]
    encodings: np.ndarray  # (m x d)

    @property
    def count(self) -> int:
        return len(self.video_ids)


@dataclass(frozen=True)
class LabeledStore:
    """Per-class labelled positive and negative exemplars."""

    positives: dict[int, ClassExemplars]
    negatives: dict[int, ClassExemplars]
    dim: int

    @classmethod
    def from_corpus(cls, corpus: Corpus) -> "LabeledStore":
        pos: dict[int, list[tuple[str, np.ndarray]]] = {}
        neg: dict[int, list[tuple[str, np.ndarray]]] = {}
        for (segment, class_id), label in sorted(corpus.segment_labels.items()):
            enc = segment_encoding(corpus, segment)
            bucket = pos if label == 1 else neg
            bucket.setdefault(class_id, []).append((segment.video_id, enc))
        return cls(
            positives={c: _pack(entries) for c, entries in pos.items()},
            negatives={c: _pack(entries) for c, entries in neg.items()},
            dim=corpus.dim,
        )


def _pack(entries: list[tuple[str, np.ndarray]]) -> ClassExemplars:
    return ClassExemplars(
        video_ids=tuple(vid for vid, _ in entries),
        encodings=np.vstack([enc for _, enc in entries]),
    )


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors; 0 if either has zero norm."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    norm_a = float(np.linalg.norm(a))
    norm_b = float(np.linalg.norm(b))
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    return float(np.dot(a, b) / (norm_a * norm_b))


def sim_features(
    segment: SegmentRef,
    class_id: int,
    store: LabeledStore,
    corpus: Corpus,
) -> tuple[float, float, int, int]:
    """Summed cosine similarity to the class's labelled exemplars.

    Exemplars from the segment's own video are excluded from both sums;
    the returned counts are the number of terms actually summed.
    """
    enc = segment_encoding(corpus, segment)
    sim_pos, pos_count = _sum_similarity(enc, segment.video_id, store.positives.get(class_id))
    sim_neg, neg_count = _sum_similarity(enc, segment.video_id, store.negatives.get(class_id))
    return sim_pos, sim_neg, pos_count, neg_count


def _sum_similarity(
    enc: np.ndarray, own_video: str, exemplars: ClassExemplars | None
) -> tuple[float, int]:
    if exemplars is None:
        return 0.0, 0
    total = 0.0
    count = 0
    for vid, row in zip(exemplars.video_ids, exemplars.encodings):
        if vid == own_video:
            continue
        total += cosine_similarity(enc, row)
        count += 1
    return total, count


def _unit_rows(matrix: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(matrix, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    return matrix / safe


class _BatchSimilarity:
    """Vectorized sim sums for many segments against one class's exemplars.

    Matches the scalar path: cosine per exemplar (zero-norm rows contribute
    0), summed over exemplars from other videos.
    """

    def __init__(self, encodings: np.ndarray, video_ids: list[str]):
        self.unit = _unit_rows(encodings)
        self.video_ids = video_ids

    def sums(self, exemplars: ClassExemplars | None) -> tuple[np.ndarray, np.ndarray]:
        n = self.unit.shape[0]
        if exemplars is None:
            return np.zeros(n), np.zeros(n, dtype=np.int64)
        sims = self.unit @ _unit_rows(exemplars.encodings).T  # (n x m)
        totals = sims.sum(axis=1)
        counts = np.full(n, exemplars.count, dtype=np.int64)
        columns_by_video: dict[str, list[int]] = {}
        for j, vid in enumerate(exemplars.video_ids):
            columns_by_video.setdefault(vid, []).append(j)
        for i, vid in enumerate(self.video_ids):
            cols = columns_by_video.get(vid)
            if cols:
                totals[i] -= sims[i, cols].sum()
                counts[i] -= len(cols)
        return totals, counts


def build_pair_rows(
    candidates: CandidateSet,
    video_scores: np.ndarray,
    store: LabeledStore,
    corpus: Corpus,
) -> list[tuple[SegmentRef, int, PairFeatureRow]]:
    """One feature row per (candidate segment, class), ordered by
    (class, video id, start)."""
    if candidates.num_pairs() == 0:
        raise ValueError("candidate set is empty")
    video_row = _video_row_index(video_scores, corpus)
    out: list[tuple[SegmentRef, int, PairFeatureRow]] = []
    for class_id in sorted(candidates.segments):
        segs = sorted(candidates.segments[class_id], key=lambda s: (s.video_id, s.start, s.length))
        encodings = np.vstack([segment_encoding(corpus, seg) for seg in segs])
        batch = _BatchSimilarity(encodings, [seg.video_id for seg in segs])
        sim_pos, pos_count = batch.sums(store.positives.get(class_id))
        sim_neg, neg_count = batch.sums(store.negatives.get(class_id))
        for i, seg in enumerate(segs):
            row = PairFeatureRow(
                encoding=encodings[i],
                candidate_score=float(video_scores[video_row[seg.video_id], class_id]),
                class_id=class_id,
                sim_pos=float(sim_pos[i]),
                sim_neg=float(sim_neg[i]),
                pos_count=int(pos_count[i]),
                neg_count=int(neg_count[i]),
            )
            out.append((seg, class_id, row))
    return out


def build_training_rows_keyed(
    corpus: Corpus,
    store: LabeledStore,
    video_scores: np.ndarray,
) -> list[tuple[SegmentRef, int, PairFeatureRow, int]]:
    """Labelled feature rows with their (segment, class) keys, ordered by
    (class, video id, start)."""
    if not corpus.segment_labels:
        raise ValueError("corpus has no segment labels")
    values = set(corpus.segment_labels.values())
    if len(values) < 2:
        only = values.pop()
        raise ValueError(
            f"degenerate labels: every segment label is {only}; need both classes"
        )
    video_row = _video_row_index(video_scores, corpus)

    by_class: dict[int, list[tuple[SegmentRef, int]]] = {}
    for (segment, class_id), label in corpus.segment_labels.items():
        by_class.setdefault(class_id, []).append((segment, label))

    out: list[tuple[SegmentRef, int, PairFeatureRow, int]] = []
    for class_id in sorted(by_class):
        entries = sorted(by_class[class_id], key=lambda e: (e[0].video_id, e[0].start, e[0].length))
        segs = [seg for seg, _ in entries]
        encodings = np.vstack([segment_encoding(corpus, seg) for seg in segs])
        batch = _BatchSimilarity(encodings, [seg.video_id for seg in segs])
        sim_pos, pos_count = batch.sums(store.positives.get(class_id))
        sim_neg, neg_count = batch.sums(store.negatives.get(class_id))
        for i, (seg, label) in enumerate(entries):
            row = PairFeatureRow(
                encoding=encodings[i],
                candidate_score=float(video_scores[video_row[seg.video_id], class_id]),
                class_id=class_id,
                sim_pos=float(sim_pos[i]),
                sim_neg=float(sim_neg[i]),
                pos_count=int(pos_count[i]),
                neg_count=int(neg_count[i]),
            )
            out.append((seg, class_id, row, label))
    return out


def build_training_rows(
    corpus: Corpus,
    store: LabeledStore,
    video_scores: np.ndarray,
) -> list[tuple[PairFeatureRow, int]]:
    """One labelled feature row per segment label (see the keyed variant)."""
    return [
        (row, label)
        for _, _, row, label in build_training_rows_keyed(corpus, store, video_scores)
    ]


def _video_row_index(video_scores: np.ndarray, corpus: Corpus) -> dict[str, int]:
    video_scores = np.asarray(video_scores)
    expected = (len(corpus.videos), corpus.num_classes)
    if video_scores.shape != expected:
        raise ValueError(
            f"video score matrix shape {video_scores.shape} does not match corpus {expected}"
        )
    return {vid: i for i, vid in enumerate(corpus.videos)}
