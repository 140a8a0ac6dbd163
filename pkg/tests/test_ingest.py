import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.io import wavfile

from hirability.audio import frame_energy, stft
from hirability.core import Split, TraitVector, ValidationError
from hirability.ingest import (ArtifactError, AudioClip, FormatError, ModelArtifact, N_LANDMARKS,
                               VISUAL_COLUMNS, atomic_write_text, fingerprint, load_annotations,
                               load_model, load_transcripts, load_visual_track, load_wav,
                               read_annotations, save_model, write_annotations, write_visual_track,
                               write_wav)
from hirability.models import fit_nb
from hirability.models.linear import SVC, fit_linear_sv, fit_logistic, fit_ols, fit_ridge
from hirability.models.tree import CLASSIFICATION, fit_cart, fit_forest

HEADER = "video_id,I,O,C,E,A,ES\n"


def test_parse_row():
    t = read_annotations(HEADER + "v1,0.7,0.5,0.6,0.5,0.5,0.5\n", "train")
    assert t.rows["v1"] == TraitVector(0.7, 0.5, 0.6, 0.5, 0.5, 0.5)
    assert t.split["v1"] is Split.TRAIN


def test_out_of_range_names_row():
    with pytest.raises(ValidationError, match="row 3"):
        read_annotations(HEADER + "v1,0.7,0.5,0.6,0.5,0.5,0.5\nv2,1.2,0.5,0.5,0.5,0.5,0.5\n", "test")


def test_permuted_header_and_n_column():
    t = read_annotations("ES,A,E,C,O,I,video_id\n0.1,0.2,0.3,0.4,0.5,0.6,x\n", "train")
    assert t.rows["x"].as_array().tolist() == [0.6, 0.5, 0.4, 0.3, 0.2, 0.1]
    n = read_annotations("video_id,I,O,C,E,A,N\nx,0.6,0.5,0.4,0.3,0.2,0.25\n", "train", invert_n=True)
    assert n.rows["x"].es == 0.75


@pytest.mark.parametrize("text,match", [
    ("video_id,I,O,C,E\nx,1,1,1,1\n", "lacks"),
    (HEADER + "x,0.5,0.5\n", "row 2"),
    (HEADER + "x,0.5,0.5,abc,0.5,0.5,0.5\n", "malformed C"),
    (HEADER + "x,0.5,0.5,,0.5,0.5,0.5\n", "missing C"),
    (HEADER + "x,0.5,0.5,0.5,0.5,0.5,0.5\nx,0.5,0.5,0.5,0.5,0.5,0.5\n", "duplicates"),
    ("", "empty"),
])
def test_annotation_errors(text, match):
    with pytest.raises(ValueError, match=match):
        read_annotations(text, "train")


def test_bad_split_tag():
    with pytest.raises(ValueError, match="split"):
        read_annotations(HEADER, "validation")


def test_annotation_file_roundtrip_deterministic(tmp_path):
    p = tmp_path / "a.csv"
    p.write_text(HEADER + "v1,0.7,0.5,0.6,0.5,0.5,0.5\nv2,0.1,0.2,0.3,0.4,0.5,0.6\n")
    a = load_annotations(p, "train")
    b = load_annotations(p, "train")
    assert a == b
    q = tmp_path / "b.csv"
    write_annotations(a, q)
    assert load_annotations(q, "train") == a


def test_transcripts(tmp_path):
    (tmp_path / "t").mkdir()
    (tmp_path / "t" / "v1.txt").write_text("hello there")
    (tmp_path / "t" / "v2.txt").write_text("bye")
    assert load_transcripts(tmp_path / "t", {"v1"}) == {"v1": "hello there"}
    (tmp_path / "m.json").write_text(json.dumps({"v1": "a", "v2": "b"}))
    assert load_transcripts(tmp_path / "m.json") == {"v1": "a", "v2": "b"}
    (tmp_path / "bad.json").write_text("[1, 2]")
    with pytest.raises(FormatError):
        load_transcripts(tmp_path / "bad.json")


def test_wav_scaling_and_stereo(tmp_path):
    p = tmp_path / "s.wav"
    wavfile.write(p, 16000, np.array([[16384, -16384], [32767, 32767]], dtype=np.int16))
    clip = load_wav(p)
    assert clip.samples.tolist() == [0.0, 32767 / 32768]


def test_resampled_silence(tmp_path):
    p = tmp_path / "z.wav"
    wavfile.write(p, 44100, np.zeros(44100, dtype=np.int16))
    clip = load_wav(p)
    assert clip.sample_rate == 16000 and clip.samples.size == 16000 and not clip.samples.any()


def test_resampled_tone_keeps_frequency(tmp_path):
    p = tmp_path / "tone.wav"
    t = np.arange(44100) / 44100
    wavfile.write(p, 44100, (0.5 * np.sin(2 * np.pi * 1000 * t)).astype(np.float32))
    x = load_wav(p).samples
    spec = np.abs(np.fft.rfft(x))
    assert np.argmax(spec) == 1000


def test_square_wave_energy_after_load(tmp_path):
    p = tmp_path / "sq.wav"
    x = np.where((np.arange(16000) // 40) % 2 == 0, 1.0, -1.0).astype(np.float32)
    wavfile.write(p, 16000, x)
    e = frame_energy(stft(load_wav(p)).frames)
    assert np.abs(e - 1.0).max() <= 1e-6


def test_wav_write_read_roundtrip(tmp_path):
    x = np.round(np.random.default_rng(0).uniform(-0.9, 0.9, 800) * 32768) / 32768
    write_wav(tmp_path / "r.wav", AudioClip(x, 16000))
    assert np.array_equal(load_wav(tmp_path / "r.wav").samples, x)


def test_corrupt_wav(tmp_path):
    p = tmp_path / "bad.wav"
    p.write_bytes(b"RIFF\x00\x00\x00\x00garbage")
    with pytest.raises(FormatError, match="bad.wav"):
        load_wav(p)


def _track_rows(n=2, gaze=(0.0, 0.0, 1.0), contact=(0, 1)):
    rows = []
    for k in range(n):
        rows.append([k * 0.1] + [float(j) for j in range(N_LANDMARKS)] * 2 + list(gaze) + [0.0, 0.0,
                                                                                         contact[k % 2]])
    return rows


def _write_track_csv(path, rows, header=VISUAL_COLUMNS):
    path.write_text(",".join(header) + "\n" + "".join(",".join(map(str, r)) + "\n" for r in rows))


def test_visual_track_load(tmp_path):
    p = tmp_path / "v.csv"
    _write_track_csv(p, _track_rows())
    tr = load_visual_track(p)
    assert len(tr) == 2 and tr.landmarks.shape == (2, N_LANDMARKS, 2)
    assert tr.eye_contact.tolist() == [False, True]
    write_visual_track(tmp_path / "w.csv", tr)
    again = load_visual_track(tmp_path / "w.csv")
    assert np.array_equal(again.landmarks, tr.landmarks) and np.array_equal(again.t, tr.t)


def test_visual_track_errors(tmp_path):
    p = tmp_path / "v.csv"
    _write_track_csv(p, _track_rows(gaze=(0.0, 0.0, 0.0)))
    with pytest.raises(ValidationError, match="gaze"):
        load_visual_track(p)
    _write_track_csv(p, _track_rows(contact=(0, 2)))
    with pytest.raises(FormatError, match="eye_contact"):
        load_visual_track(p)
    rows = _track_rows()
    rows[1][0] = 0.0
    _write_track_csv(p, rows)
    with pytest.raises(ValidationError, match="increasing"):
        load_visual_track(p)
    _write_track_csv(p, _track_rows(), header=VISUAL_COLUMNS[:-1] + ["blink"])
    with pytest.raises(FormatError, match="eye_contact"):
        load_visual_track(p)


def _models(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(40, 4))
    y = rng.uniform(size=40)
    yb = np.r_[0.0, 1.0, rng.integers(0, 2, 38)]
    return X, {
        "ols": fit_ols(X, y),
        "ridge": fit_ridge(X, y, 0.3),
        "logistic": fit_logistic(X, yb, epochs=30),
        "svc": fit_linear_sv(X, yb, SVC, epochs=30),
        "nb": fit_nb(rng.integers(0, 3, size=(40, 4)), yb),
        "cart": fit_cart(X, y, max_depth=4),
        "forest": fit_forest(X, yb, CLASSIFICATION, n_trees=7, seed=seed),
    }


@settings(max_examples=10)
@given(st.integers(0, 2**31 - 1))
def test_every_family_roundtrips(tmp_path_factory, seed):
    d = tmp_path_factory.mktemp("m")
    X, models = _models(seed)
    for name, m in models.items():
        art = ModelArtifact(m, "I", {"seed": seed}, ["a", "b", "c", "d"], fingerprint(X))
        again = load_model(save_model(art, d / f"{name}.json"))
        assert np.array_equal(again.predict(X), art.predict(X)), name
        assert again.input_schema == ["a", "b", "c", "d"]


def test_forest_of_100_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(60, 3))
    f = fit_forest(X, X[:, 0] + rng.normal(0, .1, 60), n_trees=100, seed=1)
    again = load_model(save_model(ModelArtifact(f, "I"), tmp_path / "f.json")).model
    assert np.array_equal(again.tree_predictions(X), f.tree_predictions(X))


def test_tampering_detected(tmp_path):
    X, models = _models(0)
    p = save_model(ModelArtifact(models["ols"], "I"), tmp_path / "m.json")
    doc = json.loads(p.read_text())
    for key, value in (("family", "cart"), ("schema_version", 2)):
        bad = dict(doc, **{key: value})
        (tmp_path / "bad.json").write_text(json.dumps(bad))
        with pytest.raises(ArtifactError):
            load_model(tmp_path / "bad.json")
    bad = json.loads(p.read_text())
    bad["parameters"]["bias"] += 1.0
    (tmp_path / "bad.json").write_text(json.dumps(bad))
    with pytest.raises(ArtifactError, match="checksum"):
        load_model(tmp_path / "bad.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ArtifactError):
        load_model(tmp_path / "bad.json")


def test_atomic_write_leaves_no_temp(tmp_path):
    atomic_write_text(tmp_path / "x" / "f.txt", "hello")
    assert [p.name for p in (tmp_path / "x").iterdir()] == ["f.txt"]
