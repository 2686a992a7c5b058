"""Ranked-list construction and the localization metrics.

Per class, predictions become a score-descending ranked list capped at a
submission limit. Average precision for a class is

    AP = sum_i Prec(i) * rel(i) / N_c

with Prec(i) the precision at rank i, rel(i) the binary relevance of the
item at rank i, and N_c the total number of relevant segments for the class
(so relevants missing from the list count against the score). mAP averages
AP over classes that have at least one relevant segment; classes with none
are reported as skipped because the per-class denominator would be zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from .corpus import SegmentRef

DEFAULT_CAP = 100_000


@dataclass(frozen=True)
class RankedList:
    """Score-descending segments for one class, ties broken by
    (video_id, start) ascending, truncated to ``cap`` entries."""

    class_id: int
    entries: tuple[tuple[SegmentRef, float], ...]
    cap: int


@dataclass(frozen=True)
class EvalReport:
    per_class_ap: dict[int, float]
    mean_ap: float
    n_c: dict[int, int]
    recall_at_cap: dict[int, float]
    classes_skipped: list[int]

    def to_dict(self) -> dict:
        return {
            "map": self.mean_ap,
            "per_class": [
                {
                    "class_id": c,
                    "ap": self.per_class_ap[c],
                    "n_c": self.n_c[c],
                    "recall_at_cap": self.recall_at_cap[c],
                }
                for c in sorted(self.per_class_ap)
            ],
            "classes_skipped": self.classes_skipped,
        }


def rank_segments(
    scores_by_class: Mapping[int, Sequence[tuple[SegmentRef, float]]],
    cap: int = DEFAULT_CAP,
) -> dict[int, RankedList]:
    """Sort each class's scored segments into a capped ranked list."""
    if cap < 1:
        raise ValueError("cap must be >= 1")
    ranked: dict[int, RankedList] = {}
    for class_id in sorted(scores_by_class):
        scored = list(scores_by_class[class_id])
        seen: set[SegmentRef] = set()
        for seg, score in scored:
            if not math.isfinite(score):
                raise ValueError(f"non-finite score for {seg} in class {class_id}")
            if seg in seen:
                raise ValueError(f"duplicate segment {seg} in class {class_id}")
            seen.add(seg)
        scored.sort(key=lambda item: (-item[1], item[0].video_id, item[0].start))
        ranked[class_id] = RankedList(class_id, tuple(scored[:cap]), cap)
    return ranked


def average_precision(ranked: RankedList, relevant: set[SegmentRef], n_c: int) -> float:
    """Precision-weighted relevance along the list, normalized by the total
    relevant count (so missing relevants contribute zero)."""
    if n_c < 1:
        raise ValueError("n_c must be >= 1")
    hits = 0
    terms = []
    for i, (seg, _) in enumerate(ranked.entries, start=1):
        if seg in relevant:
            hits += 1
            terms.append(hits / i)
    return math.fsum(terms) / n_c


def mean_average_precision(per_class_ap: Mapping[int, float], n_c: Mapping[int, int]) -> float:
    """Unweighted mean AP over classes with at least one relevant segment."""
    evaluable = [c for c in per_class_ap if n_c.get(c, 0) > 0]
    if not evaluable:
        raise ValueError("no class has relevant segments")
    return math.fsum(per_class_ap[c] for c in evaluable) / len(evaluable)


def evaluate(
    predictions: Mapping[int, Sequence[tuple[SegmentRef, float]]],
    ground_truth: set[tuple[SegmentRef, int]],
    num_classes: int,
    cap: int = DEFAULT_CAP,
    known_videos: set[str] | None = None,
) -> EvalReport:
    """Score predictions against ground truth.

    ``predictions`` maps class -> scored segments (missing classes count as
    empty lists). When ``known_videos`` is given, predictions referencing
    other videos are rejected.
    """
    if not ground_truth:
        raise ValueError("ground truth is empty")
    for class_id, scored in predictions.items():
        if not 0 <= class_id < num_classes:
            raise ValueError(f"prediction class {class_id} out of range [0, {num_classes})")
        if known_videos is not None:
            for seg, _ in scored:
                if seg.video_id not in known_videos:
                    raise ValueError(f"prediction references unknown video {seg.video_id!r}")
    for seg, class_id in ground_truth:
        if not 0 <= class_id < num_classes:
            raise ValueError(f"ground truth class {class_id} out of range [0, {num_classes})")

    relevant_by_class: dict[int, set[SegmentRef]] = {}
    for seg, class_id in ground_truth:
        relevant_by_class.setdefault(class_id, set()).add(seg)

    ranked = rank_segments(predictions, cap=cap)
    per_class_ap: dict[int, float] = {}
    n_c: dict[int, int] = {}
    recall: dict[int, float] = {}
    skipped: list[int] = []
    for class_id in range(num_classes):
        relevant = relevant_by_class.get(class_id, set())
        if not relevant:
            skipped.append(class_id)
            continue
        lst = ranked.get(class_id, RankedList(class_id, (), cap))
        n_c[class_id] = len(relevant)
        per_class_ap[class_id] = average_precision(lst, relevant, len(relevant))
        retrieved = {seg for seg, _ in lst.entries}
        recall[class_id] = len(relevant & retrieved) / len(relevant)
    mean_ap = mean_average_precision(per_class_ap, n_c)
    return EvalReport(
        per_class_ap=per_class_ap,
        mean_ap=mean_ap,
        n_c=n_c,
        recall_at_cap=recall,
        classes_skipped=skipped,
    )
