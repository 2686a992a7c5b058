import numpy as np
import pytest

from segrank.corpus import Corpus, SegmentRef, Video
from segrank.synthetic import GeneratorSpec, generate


def make_corpus(frames_by_video, num_classes=2, video_labels=(), segment_labels=(), segment_length=5):
    """Small in-memory corpus from {video_id: frame matrix}."""
    videos = {vid: Video(vid, np.asarray(frames, dtype=np.float64)) for vid, frames in frames_by_video.items()}
    return Corpus(
        videos=videos,
        num_classes=num_classes,
        video_labels=dict(video_labels),
        segment_labels={(SegmentRef(*key), c): lab for key, c, lab in segment_labels},
        segment_length=segment_length,
    )


@pytest.fixture(scope="session")
def small_synthetic():
    """One small generated corpus shared by read-only tests."""
    spec = GeneratorSpec(
        num_videos=40,
        frames_per_video=25,
        d=8,
        num_classes=10,
        clusters=5,
        noise_sigma=0.3,
        positive_segment_rate=0.3,
        label_rate=0.4,
        seed=123,
    )
    return generate(spec)
