"""Corpus data model: videos, segments, labels, and their on-disk formats.

A corpus bundles frame-feature videos with video-level and segment-level
binary class labels. Everything is immutable after load so readers can be
shared freely across workers.

File formats:
  videos          JSON-lines, one ``{"id": ..., "frames": [[...], ...]}`` per line
  video labels    CSV ``video_id,class_id,label``
  segment labels  CSV ``video_id,start,length,class_id,label``

Frame features are stored at 32-bit precision in files; in memory they are
widened to float64 so downstream arithmetic is done in double precision.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

DEFAULT_SEGMENT_LENGTH = 5
DEFAULT_STRIDE = 5

VIDEO_LABELS_HEADER = ["video_id", "class_id", "label"]
SEGMENT_LABELS_HEADER = ["video_id", "start", "length", "class_id", "label"]


class CorpusError(ValueError):
    """Raised when corpus files or labels violate the format contract."""


@dataclass(eq=False)
class Video:
    """One video as a (num_frames x dim) matrix of frame features."""

    id: str
    frames: np.ndarray

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 2 or frames.shape[0] < 1 or frames.shape[1] < 1:
            raise CorpusError(f"video {self.id!r}: frames must be a non-empty 2-d matrix")
        if not np.all(np.isfinite(frames)):
            raise CorpusError(f"video {self.id!r}: frames contain non-finite values")
        frames.flags.writeable = False
        self.frames = frames

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]

    def __eq__(self, other):
        if not isinstance(other, Video):
            return NotImplemented
        return self.id == other.id and np.array_equal(self.frames, other.frames)


@dataclass(frozen=True, order=True)
class SegmentRef:
    """A window of consecutive frames within a video."""

    video_id: str
    start: int
    length: int

    def __post_init__(self):
        if self.start < 0 or self.length < 1:
            raise CorpusError(f"invalid segment (start={self.start}, length={self.length})")

    @property
    def end(self) -> int:
        return self.start + self.length


@dataclass(frozen=True)
class SegmentLabel:
    segment: SegmentRef
    class_id: int
    label: int


@dataclass(frozen=True)
class VideoLabel:
    video_id: str
    class_id: int
    label: int


@dataclass(eq=False)
class Corpus:
    """Immutable collection of videos plus their video- and segment-level labels.

    ``video_labels`` maps ``(video_id, class_id)`` to a binary label and
    ``segment_labels`` maps ``(SegmentRef, class_id)`` likewise; the dict
    keying enforces the at-most-one-label-per-pair invariant.
    """

    videos: dict[str, Video]
    num_classes: int
    video_labels: dict[tuple[str, int], int] = field(default_factory=dict)
    segment_labels: dict[tuple[SegmentRef, int], int] = field(default_factory=dict)
    segment_length: int = DEFAULT_SEGMENT_LENGTH

    def __post_init__(self):
        if self.num_classes < 1:
            raise CorpusError("num_classes must be positive")
        if self.segment_length < 1:
            raise CorpusError("segment_length must be positive")
        if not self.videos:
            raise CorpusError("corpus has no videos")
        dims = {v.dim for v in self.videos.values()}
        if len(dims) != 1:
            raise CorpusError(f"videos disagree on feature dimension: {sorted(dims)}")
        for (video_id, class_id) in self.video_labels:
            self._check_video(video_id)
            self._check_class(class_id)
        for (segment, class_id) in self.segment_labels:
            self._check_class(class_id)
            self.check_bounds(segment)
        for value in list(self.video_labels.values()) + list(self.segment_labels.values()):
            if value not in (0, 1):
                raise CorpusError(f"labels must be 0 or 1, got {value}")

    def _check_video(self, video_id: str) -> Video:
        video = self.videos.get(video_id)
        if video is None:
            raise CorpusError(f"label references unknown video {video_id!r}")
        return video

    def _check_class(self, class_id: int):
        if not 0 <= class_id < self.num_classes:
            raise CorpusError(f"class_id {class_id} out of range [0, {self.num_classes})")

    def check_bounds(self, segment: SegmentRef):
        video = self._check_video(segment.video_id)
        if segment.end > video.num_frames:
            raise CorpusError(
                f"segment out of bounds: {segment.video_id!r} start={segment.start} "
                f"length={segment.length} exceeds {video.num_frames} frames"
            )

    @property
    def dim(self) -> int:
        return next(iter(self.videos.values())).dim

    @property
    def video_ids(self) -> list[str]:
        return list(self.videos)

    def __eq__(self, other):
        if not isinstance(other, Corpus):
            return NotImplemented
        return (
            self.videos == other.videos
            and self.num_classes == other.num_classes
            and self.video_labels == other.video_labels
            and self.segment_labels == other.segment_labels
            and self.segment_length == other.segment_length
        )


def enumerate_segments(video: Video, length: int, stride: int) -> list[SegmentRef]:
    """All fully-contained windows of ``length`` frames, every ``stride`` frames.

    Starts at 0 and drops any incomplete tail window.
    """
    if length < 1:
        raise ValueError("length must be >= 1")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    return [
        SegmentRef(video.id, start, length)
        for start in range(0, video.num_frames - length + 1, stride)
    ]


def mean_pool(rows: np.ndarray) -> np.ndarray:
    """Arithmetic mean over the rows of an (n x d) matrix, in float64."""
    rows = np.asarray(rows, dtype=np.float64)
    if rows.ndim != 2 or rows.shape[0] < 1:
        raise ValueError("mean_pool needs at least one row")
    return rows.mean(axis=0)


def segment_encoding(corpus: Corpus, segment: SegmentRef) -> np.ndarray:
    """Mean-pooled frame features of the segment's window."""
    corpus.check_bounds(segment)
    frames = corpus.videos[segment.video_id].frames
    return mean_pool(frames[segment.start : segment.end])


def video_encoding(corpus: Corpus, video_id: str) -> np.ndarray:
    """Mean-pooled frame features of the whole video."""
    return mean_pool(corpus._check_video(video_id).frames)


def _round_trip_float32(frames: np.ndarray) -> np.ndarray:
    return frames.astype(np.float32).astype(np.float64)


def load_corpus(
    videos_path: str | Path,
    video_labels_path: str | Path,
    segment_labels_path: str | Path,
    num_classes: int,
    segment_length: int = DEFAULT_SEGMENT_LENGTH,
) -> Corpus:
    """Read and validate the three corpus files.

    Errors carry the offending file and line number. Frame values are
    snapped to their 32-bit file precision so save/load round-trips exactly.
    """
    videos: dict[str, Video] = {}
    dim: int | None = None
    videos_path = Path(videos_path)
    for lineno, line in enumerate(_read_lines(videos_path), start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
            video_id = record["id"]
            frames = np.asarray(record["frames"], dtype=np.float64)
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise CorpusError(f"{videos_path}:{lineno}: malformed video line ({exc})") from exc
        if not isinstance(video_id, str):
            raise CorpusError(f"{videos_path}:{lineno}: video id must be a string")
        if video_id in videos:
            raise CorpusError(f"{videos_path}:{lineno}: duplicate video id {video_id!r}")
        if frames.ndim != 2:
            raise CorpusError(f"{videos_path}:{lineno}: frames must be a matrix")
        if dim is None:
            dim = frames.shape[1]
        elif frames.shape[1] != dim:
            raise CorpusError(
                f"{videos_path}:{lineno}: dimension mismatch "
                f"(expected {dim}, got {frames.shape[1]})"
            )
        try:
            videos[video_id] = Video(video_id, _round_trip_float32(frames))
        except CorpusError as exc:
            raise CorpusError(f"{videos_path}:{lineno}: {exc}") from exc

    video_labels: dict[tuple[str, int], int] = {}
    for lineno, row in _read_csv(Path(video_labels_path), VIDEO_LABELS_HEADER):
        video_id = row["video_id"]
        class_id = _parse_int(row["class_id"], video_labels_path, lineno, "class_id")
        label = _parse_label(row["label"], video_labels_path, lineno)
        key = (video_id, class_id)
        if key in video_labels:
            raise CorpusError(f"{video_labels_path}:{lineno}: duplicate label for {key}")
        video_labels[key] = label

    segment_labels: dict[tuple[SegmentRef, int], int] = {}
    for lineno, row in _read_csv(Path(segment_labels_path), SEGMENT_LABELS_HEADER):
        try:
            segment = SegmentRef(
                row["video_id"],
                _parse_int(row["start"], segment_labels_path, lineno, "start"),
                _parse_int(row["length"], segment_labels_path, lineno, "length"),
            )
        except CorpusError as exc:
            raise CorpusError(f"{segment_labels_path}:{lineno}: {exc}") from exc
        class_id = _parse_int(row["class_id"], segment_labels_path, lineno, "class_id")
        label = _parse_label(row["label"], segment_labels_path, lineno)
        key = (segment, class_id)
        if key in segment_labels:
            raise CorpusError(
                f"{segment_labels_path}:{lineno}: duplicate label for "
                f"({segment.video_id!r}, {segment.start}, {segment.length}, class {class_id})"
            )
        segment_labels[key] = label

    return Corpus(
        videos=videos,
        num_classes=num_classes,
        video_labels=video_labels,
        segment_labels=segment_labels,
        segment_length=segment_length,
    )


def save_corpus(
    corpus: Corpus,
    videos_path: str | Path,
    video_labels_path: str | Path,
    segment_labels_path: str | Path,
):
    """Write the three corpus files in a deterministic (sorted) order."""
    with open(videos_path, "w", encoding="utf-8") as fh:
        for video_id in sorted(corpus.videos):
            frames = corpus.videos[video_id].frames.astype(np.float32)
            record = {"id": video_id, "frames": [[float(x) for x in row] for row in frames]}
            fh.write(json.dumps(record) + "\n")
    with open(video_labels_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(VIDEO_LABELS_HEADER)
        for (video_id, class_id), label in sorted(corpus.video_labels.items()):
            writer.writerow([video_id, class_id, label])
    with open(segment_labels_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(SEGMENT_LABELS_HEADER)
        for (segment, class_id), label in sorted(corpus.segment_labels.items()):
            writer.writerow([segment.video_id, segment.start, segment.length, class_id, label])


def _read_lines(path: Path) -> Iterable[str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            yield from fh
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc


def _read_csv(path: Path, header: list[str]):
    rows = []
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            try:
                actual = next(reader)
            except StopIteration:
                raise CorpusError(f"{path}:1: missing header (expected {','.join(header)})")
            if actual != header:
                raise CorpusError(
                    f"{path}:1: bad header {','.join(actual)!r} (expected {','.join(header)})"
                )
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                if len(row) != len(header):
                    raise CorpusError(
                        f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}"
                    )
                rows.append((lineno, dict(zip(header, row))))
    except OSError as exc:
        raise CorpusError(f"cannot read {path}: {exc}") from exc
    return rows


def _parse_int(text: str, path, lineno: int, name: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise CorpusError(f"{path}:{lineno}: {name} must be an integer, got {text!r}") from exc


def _parse_label(text: str, path, lineno: int) -> int:
    if text not in ("0", "1"):
        raise CorpusError(f"{path}:{lineno}: label must be 0 or 1, got {text!r}")
    return int(text)
