from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hirability.core import OCEAN, TRAITS, Mode, ValidationError
from hirability.pipeline import (ExperimentConfig, ModelSpec, from_synthetic, load_config,
                                 load_features, mean_baseline, run_direct, run_two_stage, window_sweep)
from hirability.synth import generate, generate_synthetic, preset


@pytest.fixture(scope="module")
def vec_data():
    return from_synthetic(generate(preset("default", n_samples=300, seed=11), with_text=False))


@pytest.fixture(scope="module")
def audio_dir(tmp_path_factory):
    root = tmp_path_factory.mktemp("audio_ds")
    generate_synthetic(preset("default", n_samples=120, seed=5, visual_seconds=2), root)
    return root


def test_zero_noise_ols_recovers():
    data = from_synthetic(generate(preset("zero-noise", n_samples=200, seed=3), with_text=False),
                          "annotations")
    assert run_direct(ExperimentConfig(modality="annotations"), data, ModelSpec("ols")).report.acc >= 0.999


def test_config_validation(tmp_path):
    with pytest.raises(ValidationError, match="window_s"):
        ExperimentConfig(window_s=1)
    with pytest.raises(ValidationError, match="modality"):
        ExperimentConfig(modality="smell")
    with pytest.raises(ValidationError, match="unknown config keys"):
        ExperimentConfig.from_dict({"seeed": 1})
    p = tmp_path / "c.toml"
    p.write_text('[experiment]\nmodality = "text"\ntarget_mode = "clf"\nstage1_model = "ridge"\n')
    cfg = load_config(p)
    assert cfg.modality == "text" and cfg.target_mode is Mode.CLASSIFICATION
    assert cfg.stage1_model == ModelSpec("ridge") and cfg.stage2 == ModelSpec("svc")
    assert ExperimentConfig.from_dict(cfg.to_dict()) == replace(cfg, stage2_model=ModelSpec("svc"))


def test_oracle_injection_equals_annotation_benchmark(vec_data):
    cfg = ExperimentConfig(seed=2)
    two = run_two_stage(cfg, vec_data, stage1_oracle=True)
    ann = vec_data.with_features(vec_data.labels[:, 1:], OCEAN, "annotations")
    direct = run_direct(cfg, ann, cfg.stage2)
    assert np.array_equal(two.predictions, direct.predictions)
    assert two.report.mae == direct.report.mae


@settings(max_examples=5)
@given(st.integers(0, 2**31 - 1), st.sampled_from(["oof", "gt"]), st.sampled_from(["reg", "clf"]))
def test_test_labels_are_not_read_before_evaluation(vec_data, seed, protocol, mode):
    cfg = ExperimentConfig(seed=1, two_stage_protocol=protocol, target_mode=Mode(mode),
                           stage1_model=ModelSpec("ridge"), folds=3)
    rng = np.random.default_rng(seed)
    poisoned = vec_data.labels.copy()
    poisoned[vec_data.is_test] = rng.uniform(0, 1, poisoned[vec_data.is_test].shape)
    canary = replace(vec_data, labels=poisoned)
    for run in (lambda d: run_direct(cfg, d), lambda d: run_two_stage(cfg, d)):
        assert np.array_equal(run(vec_data).predictions, run(canary).predictions)


def test_reports_reproducible(vec_data):
    cfg = ExperimentConfig(seed=4, stage1_model=ModelSpec("forest", {"n_trees": 6}), folds=3)
    a, b = run_two_stage(cfg, vec_data), run_two_stage(cfg, vec_data)
    assert a.report.mae == b.report.mae
    assert np.array_equal(a.predictions, b.predictions)
    par = run_two_stage(replace(cfg, n_jobs=4), vec_data)
    assert np.array_equal(a.predictions, par.predictions)


def test_oof_inputs_differ_from_in_sample(vec_data):
    cfg = ExperimentConfig(stage1_model=ModelSpec("ridge"), folds=4)
    two = run_two_stage(cfg, vec_data)
    gt = run_two_stage(replace(cfg, two_stage_protocol="gt"), vec_data)
    assert not np.array_equal(two.stage2_train_inputs, gt.stage2_train_inputs)
    assert np.array_equal(gt.stage2_train_inputs, vec_data.labels[~vec_data.is_test][:, 1:])
    assert set(two.stage1_reports) == set(OCEAN)


def test_categorical_ocean_and_classification(vec_data):
    cfg = ExperimentConfig(ocean_mode="categorical", target_mode=Mode.CLASSIFICATION,
                           stage1_model=ModelSpec("ridge"))
    two = run_two_stage(cfg, vec_data)
    assert set(np.unique(two.stage2_train_inputs)) <= {0.0, 1.0}
    assert set(np.unique(two.predictions)) <= {0.0, 1.0}
    assert 0.0 <= two.report.acc <= 1.0


@pytest.mark.parametrize("family", ["ols", "ridge", "svr", "cart", "forest"])
def test_regressors_beat_mean_on_vectors(vec_data, family):
    params = {"n_trees": 30} if family == "forest" else {}
    rep = run_direct(ExperimentConfig(seed=0), vec_data, ModelSpec(family, params)).report
    assert rep.acc > mean_baseline(vec_data)


@pytest.mark.parametrize("family", ["logistic", "svc", "cart", "forest", "nb"])
def test_classifiers_run(vec_data, family):
    data = vec_data
    if family == "nb":
        data = from_synthetic(generate(preset("default", n_samples=300, seed=11)), "text")
    cfg = ExperimentConfig(target_mode=Mode.CLASSIFICATION)
    rep = run_direct(cfg, data, ModelSpec(family, {"n_trees": 30} if family == "forest" else {})).report
    assert rep.acc >= mean_baseline(data, mode=Mode.CLASSIFICATION) - 0.05


def test_text_features_from_training_split_only():
    d = generate(preset("default", n_samples=80, seed=6))
    fs = from_synthetic(d, "text")
    train_docs = [t for t, s in zip(d.transcripts, d.split) if s.value == "train"]
    from hirability.text import build_vocab, preprocess
    assert fs.vocab == build_vocab([preprocess(t) for t in train_docs])
    assert fs.X.shape == (80, len(fs.vocab))


def test_audio_rf_beats_mean(audio_dir):
    fs = load_features(audio_dir, "audio")
    assert fs.X.shape == (120, 56)
    rep = run_direct(ExperimentConfig(modality="audio", trait="E"), fs,
                     ModelSpec("forest", {"n_trees": 60})).report
    assert 0.0 <= rep.acc <= 1.0
    assert rep.acc > mean_baseline(fs, "E")


def test_window_sweep_shape_and_saturation(audio_dir):
    fs = load_features(audio_dir, "audio")
    rows = window_sweep(ExperimentConfig(modality="audio"), fs)
    for t in TRAITS:
        pts = [r for r in rows if r["trait"] == t]
        assert [r["window_s"] for r in pts] == list(range(2, 16))
    acc = {(r["window_s"], r["trait"]): r["acc"] for r in rows}
    for t in TRAITS:
        assert acc[(15, t)] - acc[(6, t)] <= 0.01, t


def test_window_too_long_for_clip(tmp_path):
    from hirability.audio import thin_slice_aggregate
    from hirability.core import TooShortError
    from hirability.ingest import AudioClip
    with pytest.raises(TooShortError):
        thin_slice_aggregate(AudioClip(np.zeros(16000), 16000), 2)


def test_visual_and_text_loading(audio_dir):
    vis = load_features(audio_dir, "visual")
    assert vis.X.shape == (120, 10) and np.isfinite(vis.X).all()
    txt = load_features(audio_dir, "text")
    assert txt.X.shape[0] == 120


def test_missing_modality_files_tolerated_up_to_limit(tmp_path):
    generate_synthetic(preset("default", n_samples=40, seed=8, audio_seconds=2, visual_seconds=3), tmp_path)
    (tmp_path / "visual" / "v00000.csv").unlink()
    with pytest.warns(UserWarning, match="skipping 1 samples"):
        fs = load_features(tmp_path, "visual")
    assert "v00000" not in fs.ids and len(fs.ids) == 39
    for vid in [f"v{k:05d}" for k in range(1, 10)]:
        (tmp_path / "visual" / f"{vid}.csv").unlink()
    with pytest.raises(ValidationError, match="visual"):
        load_features(tmp_path, "visual")


def test_gray_band_rows_are_dropped(tmp_path):
    from hirability.core import Split, TraitVector
    from hirability.ingest import AnnotationTable, write_annotations
    rows = {f"v{k}": TraitVector(i, 0.5, 0.5, 0.5, 0.5, 0.5) for k, i in
            enumerate([0.2, 0.4, 0.41, 0.5, 0.59, 0.6, 0.9])}
    write_annotations(AnnotationTable(rows, {v: Split.TRAIN for v in rows}), tmp_path / "train.csv")
    fs = load_features(tmp_path, "annotations")
    assert fs.ids == ["v0", "v1", "v5", "v6"]
