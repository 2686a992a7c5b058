import numpy as np
import pytest

from segrank.corpus import enumerate_segments, save_corpus, segment_encoding
from segrank.features import cosine_similarity
from segrank.synthetic import (
    GeneratorSpec,
    class_prototypes,
    generate,
)


def spec_with(**overrides):
    base = dict(
        num_videos=30,
        frames_per_video=25,
        d=8,
        num_classes=10,
        clusters=5,
        noise_sigma=0.3,
        positive_segment_rate=0.3,
        label_rate=0.5,
        seed=42,
    )
    base.update(overrides)
    return GeneratorSpec(**base)


def test_same_seed_identical_outputs(tmp_path):
    corpus_a, truth_a = generate(spec_with())
    corpus_b, truth_b = generate(spec_with())
    assert corpus_a == corpus_b
    assert truth_a.relevant == truth_b.relevant
    for name, corpus in (("a", corpus_a), ("b", corpus_b)):
        d = tmp_path / name
        d.mkdir()
        save_corpus(corpus, d / "v.jsonl", d / "vl.csv", d / "sl.csv")
    for fname in ("v.jsonl", "vl.csv", "sl.csv"):
        assert (tmp_path / "a" / fname).read_bytes() == (tmp_path / "b" / fname).read_bytes()


def test_different_seed_differs():
    corpus_a, _ = generate(spec_with())
    corpus_b, _ = generate(spec_with(seed=43))
    assert corpus_a != corpus_b


def test_zero_noise_single_class_segments_equal_prototype():
    spec = spec_with(num_classes=1, clusters=1, noise_sigma=0.0, distractor_rate=0.0)
    corpus, truth = generate(spec)
    proto = class_prototypes(spec)[0].astype(np.float32).astype(np.float64)
    assert truth.relevant, "expected at least one positive segment"
    for seg in truth.relevant:
        enc = segment_encoding(corpus, seg)
        assert np.allclose(enc, proto, atol=1e-7)


def test_zero_noise_same_class_cosine_is_one():
    corpus, truth = generate(spec_with(noise_sigma=0.0, seed=5))
    by_class = {}
    for seg, classes in truth.relevant.items():
        for c in classes:
            by_class.setdefault(c, []).append(seg)
    checked = 0
    for c, segs in by_class.items():
        if len(segs) >= 2:
            enc_a = segment_encoding(corpus, segs[0])
            enc_b = segment_encoding(corpus, segs[1])
            assert cosine_similarity(enc_a, enc_b) == pytest.approx(1.0, abs=1e-9)
            checked += 1
    assert checked > 0


def test_segment_count():
    corpus, _ = generate(spec_with(num_videos=100, frames_per_video=25))
    total = sum(
        len(enumerate_segments(v, 5, 5)) for v in corpus.videos.values()
    )
    assert total == 500


def test_positive_segments_imply_video_label():
    corpus, truth = generate(spec_with())
    for seg, classes in truth.relevant.items():
        for c in classes:
            assert corpus.video_labels[(seg.video_id, c)] == 1


def test_video_label_positive_requires_positive_segment():
    corpus, truth = generate(spec_with())
    positive_pairs = {(seg.video_id, c) for seg, cs in truth.relevant.items() for c in cs}
    for (vid, c), label in corpus.video_labels.items():
        assert label == (1 if (vid, c) in positive_pairs else 0)


def test_labels_are_cluster_local_and_sized():
    spec = spec_with(label_rate=0.5)
    corpus, truth = generate(spec)
    m = spec.classes_per_cluster
    pool = 0
    for seg, classes in truth.relevant.items():
        (cls,) = classes
        pool += m
        cluster = cls // m
        for (lseg, c), _ in corpus.segment_labels.items():
            if lseg == seg:
                assert c // m == cluster
    # every labelled segment is a ground-truth positive for its cluster
    positive_segments = set(truth.relevant)
    for (lseg, c) in corpus.segment_labels:
        assert lseg in positive_segments
    assert abs(len(corpus.segment_labels) - round(spec.label_rate * pool)) <= 1


def test_labelled_positives_match_ground_truth():
    corpus, truth = generate(spec_with())
    for (seg, c), label in corpus.segment_labels.items():
        assert label == (1 if c in truth.relevant[seg] else 0)


def test_prototype_offsets_below_quarter_of_cluster_distance():
    spec = spec_with(d=16, num_classes=20, clusters=5)
    protos = class_prototypes(spec)
    m = spec.classes_per_cluster
    cluster_means = protos.reshape(spec.clusters, m, spec.d).mean(axis=1)
    dists = [
        np.linalg.norm(cluster_means[i] - cluster_means[j])
        for i in range(spec.clusters)
        for j in range(i + 1, spec.clusters)
    ]
    min_dist = min(dists)
    for k in range(spec.clusters):
        for c in range(k * m, (k + 1) * m):
            offset = np.linalg.norm(protos[c] - cluster_means[k])
            assert offset < min_dist / 4


def test_distractors_never_relevant_or_labelled():
    spec = spec_with(noise_sigma=0.0, distractor_rate=0.4, positive_segment_rate=0.2, seed=9)
    corpus, truth = generate(spec)
    protos = class_prototypes(spec)
    proto_norms = np.linalg.norm(protos, axis=1)
    positives = set(truth.relevant)
    found_distractor = False
    for video in corpus.videos.values():
        for seg in enumerate_segments(video, spec.segment_length, spec.segment_length):
            enc = segment_encoding(corpus, seg)
            norm = np.linalg.norm(enc)
            if seg in positives:
                assert norm == pytest.approx(proto_norms.mean(), rel=0.2)
            elif norm > 0.1:  # distractor (background is exactly zero at zero noise)
                found_distractor = True
                assert norm < 0.6 * proto_norms.max()
                assert all(key[0] != seg for key in corpus.segment_labels)
    assert found_distractor


@pytest.mark.parametrize(
    "overrides",
    [
        dict(clusters=3),  # does not divide 10
        dict(noise_sigma=-0.1),
        dict(positive_segment_rate=0.0),
        dict(positive_segment_rate=1.0),
        dict(label_rate=0.0),
        dict(label_rate=1.5),
        dict(num_videos=0),
        dict(distractor_rate=-0.2),
        dict(distractor_rate=0.8),  # 0.3 + 0.8 > 1
    ],
)
def test_invalid_specs_rejected(overrides):
    with pytest.raises(ValueError):
        spec_with(**overrides)


def test_generated_corpus_matches_reload(tmp_path, small_synthetic):
    # in-memory frames are already at file precision
    corpus, _ = small_synthetic
    from segrank.corpus import load_corpus

    save_corpus(corpus, tmp_path / "v.jsonl", tmp_path / "vl.csv", tmp_path / "sl.csv")
    loaded = load_corpus(
        tmp_path / "v.jsonl", tmp_path / "vl.csv", tmp_path / "sl.csv",
        corpus.num_classes, corpus.segment_length,
    )
    assert loaded == corpus
