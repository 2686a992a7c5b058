"""Readers and writers for every pipeline artifact.

All writes are deterministic: rows come pre-sorted from the library, floats
are rendered with ``repr`` (shortest round-trip form), and JSON keys are
sorted. That makes identical runs produce byte-identical files.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .boosting import GbmModel
from .candidates import CandidateSet, VideoModel
from .corpus import SegmentRef
from .features import NUM_EXTRA_FEATURES, PairFeatureRow, feature_names
from .relevance import BaselineModel

CANDIDATES_HEADER = ["class_id", "video_id", "start", "length"]
PREDICTIONS_HEADER = ["class_id", "video_id", "start", "length", "score"]
GROUND_TRUTH_HEADER = ["video_id", "start", "length", "class_id"]


def _fmt(value: float) -> str:
    return repr(float(value))


def write_json(path: str | Path, payload: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ": "), indent=1)
        fh.write("\n")


def read_json(path: str | Path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_model(path: str | Path, model: VideoModel | GbmModel | BaselineModel):
    write_json(path, model.to_dict())


def read_model(path: str | Path) -> VideoModel | GbmModel | BaselineModel:
    data = read_json(path)
    kind = data.get("kind")
    if kind == "video_logistic":
        return VideoModel.from_dict(data)
    if kind == "gbm":
        return GbmModel.from_dict(data)
    if kind == "per_class_logistic":
        return BaselineModel.from_dict(data)
    raise ValueError(f"{path}: unknown model kind {kind!r}")


def write_candidates_csv(path: str | Path, candidates: CandidateSet):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CANDIDATES_HEADER)
        for class_id in sorted(candidates.segments):
            for seg in candidates.segments[class_id]:
                writer.writerow([class_id, seg.video_id, seg.start, seg.length])


def read_candidates_csv(path: str | Path) -> CandidateSet:
    """Rebuild a candidate set from its CSV; K is recovered as the largest
    per-class video count."""
    segments: dict[int, list[SegmentRef]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CANDIDATES_HEADER:
            raise ValueError(f"{path}: bad candidates header {reader.fieldnames}")
        for row in reader:
            seg = SegmentRef(row["video_id"], int(row["start"]), int(row["length"]))
            segments.setdefault(int(row["class_id"]), []).append(seg)
    if not segments:
        raise ValueError(f"{path}: no candidate rows")
    selected = {
        c: tuple(sorted({seg.video_id for seg in segs})) for c, segs in segments.items()
    }
    lengths = {seg.length for segs in segments.values() for seg in segs}
    return CandidateSet(
        k=max(len(v) for v in selected.values()),
        selected_videos=selected,
        segments={c: tuple(segs) for c, segs in segments.items()},
        length=lengths.pop() if len(lengths) == 1 else 0,
        stride=0,
    )


def write_features_csv(
    path: str | Path,
    keyed_rows: list[tuple[SegmentRef, int, PairFeatureRow]],
    labels: list[int] | None = None,
):
    """Feature rows with their (segment, class) keys; append a label column
    when labels are given."""
    if labels is not None and len(labels) != len(keyed_rows):
        raise ValueError("labels and rows disagree on length")
    d = keyed_rows[0][2].encoding.shape[0] if keyed_rows else 0
    header = ["video_id", "start", "length"] + feature_names(d)
    if labels is not None:
        header.append("label")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for i, (seg, class_id, row) in enumerate(keyed_rows):
            record = [
                seg.video_id,
                seg.start,
                seg.length,
                class_id,
                _fmt(row.candidate_score),
                _fmt(row.sim_pos),
                _fmt(row.sim_neg),
                row.pos_count,
                row.neg_count,
            ] + [_fmt(x) for x in row.encoding]
            if labels is not None:
                record.append(labels[i])
            writer.writerow(record)


def read_features_csv(
    path: str | Path,
) -> tuple[list[tuple[SegmentRef, int, PairFeatureRow]], list[int] | None]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path}: empty feature file")
        has_label = header[-1] == "label"
        enc_cols = [name for name in header if name.startswith("enc_")]
        d = len(enc_cols)
        expected = ["video_id", "start", "length"] + feature_names(d) + (
            ["label"] if has_label else []
        )
        if header != expected:
            raise ValueError(f"{path}: bad feature header")
        keyed_rows: list[tuple[SegmentRef, int, PairFeatureRow]] = []
        labels: list[int] = []
        base = 3 + NUM_EXTRA_FEATURES
        for record in reader:
            seg = SegmentRef(record[0], int(record[1]), int(record[2]))
            row = PairFeatureRow(
                encoding=np.array([float(x) for x in record[base : base + d]]),
                candidate_score=float(record[4]),
                class_id=int(record[3]),
                sim_pos=float(record[5]),
                sim_neg=float(record[6]),
                pos_count=int(record[7]),
                neg_count=int(record[8]),
            )
            keyed_rows.append((seg, row.class_id, row))
            if has_label:
                labels.append(int(record[-1]))
    return keyed_rows, (labels if has_label else None)


def write_predictions_csv(
    path: str | Path, predictions: dict[int, list[tuple[SegmentRef, float]]]
):
    """Scored pairs sorted by class, then score descending with
    (video_id, start) tie-break."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PREDICTIONS_HEADER)
        for class_id in sorted(predictions):
            scored = sorted(
                predictions[class_id],
                key=lambda item: (-item[1], item[0].video_id, item[0].start),
            )
            for seg, score in scored:
                writer.writerow([class_id, seg.video_id, seg.start, seg.length, _fmt(score)])


def read_predictions_csv(path: str | Path) -> dict[int, list[tuple[SegmentRef, float]]]:
    predictions: dict[int, list[tuple[SegmentRef, float]]] = {}
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != PREDICTIONS_HEADER:
            raise ValueError(f"{path}: bad predictions header {reader.fieldnames}")
        for row in reader:
            seg = SegmentRef(row["video_id"], int(row["start"]), int(row["length"]))
            predictions.setdefault(int(row["class_id"]), []).append((seg, float(row["score"])))
    return predictions


def write_ground_truth_csv(path: str | Path, positives: set[tuple[SegmentRef, int]]):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(GROUND_TRUTH_HEADER)
        for seg, class_id in sorted(positives, key=lambda p: (p[0], p[1])):
            writer.writerow([seg.video_id, seg.start, seg.length, class_id])


def read_ground_truth_csv(path: str | Path) -> set[tuple[SegmentRef, int]]:
    positives: set[tuple[SegmentRef, int]] = set()
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != GROUND_TRUTH_HEADER:
            raise ValueError(f"{path}: bad ground truth header {reader.fieldnames}")
        for row in reader:
            seg = SegmentRef(row["video_id"], int(row["start"]), int(row["length"]))
            positives.add((seg, int(row["class_id"])))
    if not positives:
        raise ValueError(f"{path}: no ground truth rows")
    return positives
