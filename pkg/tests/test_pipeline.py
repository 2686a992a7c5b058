import json

import numpy as np
import pytest

from segrank.boosting import GbmHyper
from segrank.corpus import enumerate_segments
from segrank.pipeline import (
    LogisticHyper,
    PipelineConfig,
    PipelineStageError,
    run_pipeline,
)
from segrank.storage import read_features_csv, read_predictions_csv
from segrank.synthetic import GeneratorSpec


def tiny_generator(seed=0):
    return GeneratorSpec(
        num_videos=60,
        frames_per_video=25,
        d=8,
        num_classes=10,
        clusters=5,
        noise_sigma=0.3,
        positive_segment_rate=0.3,
        label_rate=0.4,
        seed=seed,
    )


def tiny_config(out_dir, **overrides):
    defaults = dict(
        out_dir=str(out_dir),
        generator=tiny_generator(),
        mode="with_cg",
        model="gbm",
        seed=3,
        k=10,
        video_hyper=LogisticHyper(epochs=400, learning_rate=20.0, l2=0.0),
        gbm_hyper=GbmHyper(rounds=25),
        baseline_hyper=LogisticHyper(epochs=400, learning_rate=20.0, l2=0.0),
    )
    defaults.update(overrides)
    return PipelineConfig(**defaults)


def test_full_run_writes_all_artifacts(tmp_path):
    report = run_pipeline(tiny_config(tmp_path / "run"))
    for name in [
        "videos.jsonl", "video_labels.csv", "segment_labels.csv", "ground_truth.csv",
        "video_model.json", "candidates.csv", "train_features.csv",
        "candidate_features.csv", "relevance_model.json", "predictions.csv",
        "report.json",
    ]:
        assert (tmp_path / "run" / name).exists(), name
    stored = json.loads((tmp_path / "run" / "report.json").read_text())
    assert stored["map"] == report.mean_ap


def test_same_seed_runs_are_byte_identical(tmp_path):
    run_pipeline(tiny_config(tmp_path / "a"))
    run_pipeline(tiny_config(tmp_path / "b"))
    for name in ["predictions.csv", "report.json", "relevance_model.json", "candidates.csv"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_k_equal_v_matches_without_cg(tmp_path):
    with_cg = run_pipeline(tiny_config(tmp_path / "cg", k=60))
    without = run_pipeline(tiny_config(tmp_path / "nocg", mode="without_cg"))
    assert with_cg.to_dict() == without.to_dict()
    assert (tmp_path / "cg" / "predictions.csv").read_bytes() == (
        tmp_path / "nocg" / "predictions.csv"
    ).read_bytes()


def test_pair_counts(tmp_path):
    run_pipeline(tiny_config(tmp_path / "cg", k=10))
    run_pipeline(tiny_config(tmp_path / "nocg", mode="without_cg"))
    rows_cg, _ = read_features_csv(tmp_path / "cg" / "candidate_features.csv")
    rows_all, _ = read_features_csv(tmp_path / "nocg" / "candidate_features.csv")
    from segrank.corpus import load_corpus

    corpus = load_corpus(
        tmp_path / "cg" / "videos.jsonl",
        tmp_path / "cg" / "video_labels.csv",
        tmp_path / "cg" / "segment_labels.csv",
        num_classes=10,
    )
    total_segments = sum(len(enumerate_segments(v, 5, 5)) for v in corpus.videos.values())
    assert len(rows_all) == total_segments * corpus.num_classes
    assert len(rows_cg) < len(rows_all)


def test_baseline_model_mode(tmp_path):
    report = run_pipeline(tiny_config(tmp_path / "bl", model="baseline"))
    model = json.loads((tmp_path / "bl" / "relevance_model.json").read_text())
    assert model["kind"] == "per_class_logistic"
    assert 0.0 <= report.mean_ap <= 1.0


def test_seed_override_propagates(tmp_path):
    config = tiny_config(tmp_path / "x", seed=3)
    reseeded = config.with_seed(9)
    assert reseeded.generator.seed == 9
    assert reseeded.gbm_hyper.seed == 9
    assert reseeded.seed == 9
    assert config.generator.seed == 0  # original untouched


def test_stage_error_is_tagged(tmp_path):
    config = PipelineConfig(
        out_dir=str(tmp_path / "bad"),
        corpus_paths={
            "videos": str(tmp_path / "missing.jsonl"),
            "video_labels": str(tmp_path / "missing.csv"),
            "segment_labels": str(tmp_path / "missing2.csv"),
            "ground_truth": str(tmp_path / "missing3.csv"),
            "num_classes": 3,
        },
    )
    with pytest.raises(PipelineStageError, match=r"\[load-corpus\]"):
        run_pipeline(config)


def test_config_validation():
    with pytest.raises(ValueError, match="mode"):
        tiny_config("x", mode="sideways")
    with pytest.raises(ValueError, match="model"):
        tiny_config("x", model="transformer")
    with pytest.raises(ValueError, match="exactly one"):
        PipelineConfig(out_dir="x")


def test_config_from_dict_round_trip(tmp_path):
    data = {
        "out_dir": str(tmp_path / "cfg"),
        "mode": "with_cg",
        "seed": 5,
        "k": 4,
        "generator": {
            "num_videos": 60, "frames_per_video": 25, "d": 8, "num_classes": 10,
            "clusters": 5, "noise_sigma": 0.3, "positive_segment_rate": 0.3,
            "label_rate": 0.4, "seed": 0,
        },
        "video_model": {"epochs": 300, "learning_rate": 20.0},
        "gbm": {"rounds": 10},
    }
    config = PipelineConfig.from_dict(data)
    assert config.k == 4
    assert config.gbm_hyper.rounds == 10
    assert config.video_hyper.epochs == 300
    report = run_pipeline(config)
    assert 0.0 <= report.mean_ap <= 1.0


def test_corpus_paths_mode_runs(tmp_path):
    # generate once, then run a second pipeline from the saved files
    first = tiny_config(tmp_path / "gen")
    run_pipeline(first)
    config = PipelineConfig(
        out_dir=str(tmp_path / "from_files"),
        corpus_paths={
            "videos": str(tmp_path / "gen" / "videos.jsonl"),
            "video_labels": str(tmp_path / "gen" / "video_labels.csv"),
            "segment_labels": str(tmp_path / "gen" / "segment_labels.csv"),
            "ground_truth": str(tmp_path / "gen" / "ground_truth.csv"),
            "num_classes": 10,
        },
        seed=3,
        k=10,
        video_hyper=LogisticHyper(epochs=400, learning_rate=20.0, l2=0.0),
        gbm_hyper=GbmHyper(rounds=25),
    )
    report = run_pipeline(config)
    # same corpus, same hyper: identical outcome as the generated run
    assert (tmp_path / "from_files" / "predictions.csv").read_bytes() == (
        tmp_path / "gen" / "predictions.csv"
    ).read_bytes()
    assert 0.0 <= report.mean_ap <= 1.0
