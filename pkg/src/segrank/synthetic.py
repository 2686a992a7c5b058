"""Seeded synthetic corpora with clustered class structure and sparse labels.

Classes live in clusters: each cluster has a prototype direction and every
class sits a small offset away from its cluster's prototype, so classes in
one cluster are near neighbours of each other. Segments are either
background noise or drawn around exactly one class prototype; labelled
(segment, class) pairs are sampled only within the generating class's
cluster, which makes the unlabelled negatives hard (same neighbourhood,
different class).

All randomness flows through counter-based Philox streams keyed by
(seed, purpose, entity indices), so the output is a pure function of the
spec regardless of generation order.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .corpus import Corpus, SegmentRef, Video

# Geometry constants: prototypes sit on orthogonal directions of this norm;
# per-class offsets are this fraction of the inter-cluster distance (the
# fraction must stay below 1/4 so clusters remain well separated).
PROTOTYPE_NORM = 6.0
OFFSET_FRACTION = 0.2
# Distractor segments imitate a class at reduced feature norm: same
# direction (so exemplar similarities cannot reject them), small enough
# that mean-pooling over a whole video barely registers them.
DISTRACTOR_SCALE = 0.3

_TAG_CLUSTERS = 0
_TAG_OFFSETS = 1
_TAG_SEGMENT = 2
_TAG_LABELS = 3


@dataclass(frozen=True)
class GeneratorSpec:
    """Knobs for one synthetic corpus.

    ``distractor_rate`` controls the fraction of segments that merely
    resemble a class (scaled prototype, never relevant, never labelled);
    they model hard segment-level negatives, content that looks like a
    class without being it. Set it to 0 for positives-and-background only.
    """

    num_videos: int
    frames_per_video: int
    d: int
    num_classes: int
    clusters: int
    noise_sigma: float
    positive_segment_rate: float
    label_rate: float
    seed: int
    segment_length: int = 5
    distractor_rate: float = 0.2

    def __post_init__(self):
        for name in ("num_videos", "frames_per_video", "d", "num_classes", "clusters", "segment_length"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.num_classes % self.clusters != 0:
            raise ValueError(
                f"clusters ({self.clusters}) must divide num_classes ({self.num_classes})"
            )
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if not 0 < self.positive_segment_rate < 1:
            raise ValueError("positive_segment_rate must lie in (0, 1)")
        if not 0 < self.label_rate <= 1:
            raise ValueError("label_rate must lie in (0, 1]")
        if not 0 <= self.distractor_rate < 1:
            raise ValueError("distractor_rate must lie in [0, 1)")
        if self.positive_segment_rate + self.distractor_rate >= 1:
            raise ValueError("positive_segment_rate + distractor_rate must stay below 1")

    @property
    def classes_per_cluster(self) -> int:
        return self.num_classes // self.clusters


@dataclass(frozen=True)
class GroundTruth:
    """True relevant class set per generated segment (positives only)."""

    relevant: dict[SegmentRef, frozenset[int]]

    def positive_pairs(self) -> set[tuple[SegmentRef, int]]:
        return {(seg, c) for seg, classes in self.relevant.items() for c in classes}

    def positives_for_class(self, class_id: int) -> set[SegmentRef]:
        return {seg for seg, classes in self.relevant.items() if class_id in classes}


def _stream(seed: int, *ids: int) -> np.random.Generator:
    """Independent Philox stream keyed by (seed, purpose tag, entity ids)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, *ids])))


def _orthogonal_directions(rng: np.random.Generator, count: int, d: int) -> np.ndarray:
    """`count` unit vectors, pairwise orthogonal when count <= d."""
    if count <= d:
        gauss = rng.standard_normal((d, count))
        q, r = np.linalg.qr(gauss)
        return (q * np.sign(np.diag(r))).T
    directions = rng.standard_normal((count, d))
    return directions / np.linalg.norm(directions, axis=1, keepdims=True)


def class_prototypes(spec: GeneratorSpec) -> np.ndarray:
    """The clean (noise-free) feature vector each class's segments are drawn around."""
    cluster_dirs = _orthogonal_directions(_stream(spec.seed, _TAG_CLUSTERS), spec.clusters, spec.d)
    cluster_protos = cluster_dirs * PROTOTYPE_NORM
    if spec.clusters >= 2:
        diffs = cluster_protos[:, None, :] - cluster_protos[None, :, :]
        dist = np.linalg.norm(diffs, axis=2)
        min_dist = dist[~np.eye(spec.clusters, dtype=bool)].min()
    else:
        min_dist = 2.0 * PROTOTYPE_NORM
    offset_norm = OFFSET_FRACTION * min_dist

    protos = np.empty((spec.num_classes, spec.d))
    m = spec.classes_per_cluster
    for k in range(spec.clusters):
        offsets = _orthogonal_directions(_stream(spec.seed, _TAG_OFFSETS, k), m, spec.d)
        protos[k * m : (k + 1) * m] = cluster_protos[k] + offset_norm * offsets
    return protos


def _segment_slots(spec: GeneratorSpec) -> Iterator[tuple[int, int]]:
    slots_per_video = spec.frames_per_video // spec.segment_length
    for v in range(spec.num_videos):
        for s in range(slots_per_video):
            yield v, s


def generate(spec: GeneratorSpec) -> tuple[Corpus, GroundTruth]:
    """Build a corpus plus its ground truth, deterministically in the seed."""
    protos = class_prototypes(spec)
    length = spec.segment_length
    cluster_of = np.arange(spec.num_classes) // spec.classes_per_cluster

    videos: dict[str, Video] = {}
    relevant: dict[SegmentRef, frozenset[int]] = {}
    # (video index, slot, class) for every positive segment, generation order
    positives: list[tuple[int, int, int]] = []

    for v in range(spec.num_videos):
        video_id = _video_id(v)
        frames = np.zeros((spec.frames_per_video, spec.d))
        slots_per_video = spec.frames_per_video // length
        for s in range(slots_per_video):
            rng = _stream(spec.seed, _TAG_SEGMENT, v, s)
            kind = rng.random()
            center = np.zeros(spec.d)
            if kind < spec.positive_segment_rate:
                cls = int(rng.integers(spec.num_classes))
                center = protos[cls]
                positives.append((v, s, cls))
                relevant[SegmentRef(video_id, s * length, length)] = frozenset([cls])
            elif kind < spec.positive_segment_rate + spec.distractor_rate:
                cls = int(rng.integers(spec.num_classes))
                center = DISTRACTOR_SCALE * protos[cls]
            block = center + spec.noise_sigma * rng.standard_normal((length, spec.d))
            frames[s * length : (s + 1) * length] = block
        tail = spec.frames_per_video - slots_per_video * length
        if tail:
            rng = _stream(spec.seed, _TAG_SEGMENT, v, slots_per_video)
            frames[-tail:] = spec.noise_sigma * rng.standard_normal((tail, spec.d))
        # Snap to file precision so the in-memory corpus equals its reload.
        videos[video_id] = Video(video_id, frames.astype(np.float32).astype(np.float64))

    video_labels: dict[tuple[str, int], int] = {}
    positive_classes_by_video: dict[int, set[int]] = {}
    for v, _, cls in positives:
        positive_classes_by_video.setdefault(v, set()).add(cls)
    for v in range(spec.num_videos):
        present = positive_classes_by_video.get(v, set())
        for c in range(spec.num_classes):
            video_labels[(_video_id(v), c)] = 1 if c in present else 0

    # Candidate label pairs: each positive segment against every class in its
    # own cluster, then thinned to label_rate of the pool.
    pairs: list[tuple[SegmentRef, int, int]] = []
    for v, s, cls in positives:
        seg = SegmentRef(_video_id(v), s * length, length)
        k = cluster_of[cls]
        m = spec.classes_per_cluster
        for c in range(k * m, (k + 1) * m):
            pairs.append((seg, c, 1 if c == cls else 0))
    keep = int(round(spec.label_rate * len(pairs)))
    order = _stream(spec.seed, _TAG_LABELS).permutation(len(pairs))
    segment_labels: dict[tuple[SegmentRef, int], int] = {}
    for idx in sorted(order[:keep]):
        seg, c, label = pairs[idx]
        segment_labels[(seg, c)] = label

    corpus = Corpus(
        videos=videos,
        num_classes=spec.num_classes,
        video_labels=video_labels,
        segment_labels=segment_labels,
        segment_length=length,
    )
    return corpus, GroundTruth(relevant)


def _video_id(index: int) -> str:
    return f"v{index:06d}"
