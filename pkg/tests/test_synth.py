import filecmp

import numpy as np
import pytest

from hirability.core import OCEAN, TRAITS
from hirability.models.linear import fit_ols
from hirability.core import r_squared
from hirability.pipeline import load_features, load_table
from hirability.synth import PRESETS, generate, generate_synthetic, hirability_function, preset


def _same_tree(a, b):
    cmp = filecmp.dircmp(a, b)
    if cmp.left_only or cmp.right_only or cmp.diff_files or cmp.funny_files:
        return False
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    return not mismatch and not errors and all(_same_tree(a / d, b / d) for d in cmp.common_dirs)


def test_same_seed_same_files(tmp_path):
    spec = preset("default", n_samples=20, seed=7, audio_seconds=3, visual_seconds=3)
    generate_synthetic(spec, tmp_path / "a")
    generate_synthetic(spec, tmp_path / "b")
    assert _same_tree(tmp_path / "a", tmp_path / "b")
    generate_synthetic(preset("default", n_samples=20, seed=8, audio_seconds=3, visual_seconds=3),
                       tmp_path / "c")
    assert not _same_tree(tmp_path / "a", tmp_path / "c")


def test_zero_noise_is_exactly_linear():
    d = generate(preset("zero-noise", n_samples=300, seed=1), with_text=False)
    ocean = d.labels[:, 1:]
    expected = [float(hirability_function(d.spec, row)) for row in ocean]
    assert d.labels[:, 0].tolist() == expected
    m = fit_ols(ocean, d.labels[:, 0])
    assert r_squared(m.predict(ocean), d.labels[:, 0]) == pytest.approx(1.0, abs=1e-12)


def test_default_preset_avoids_gray_band_and_stays_in_range():
    d = generate(preset("default", n_samples=500, seed=2), with_text=False)
    i = d.labels[:, 0]
    assert not np.any((i > 0.4) & (i < 0.6))
    assert d.labels.min() >= 0 and d.labels.max() <= 1


def test_split_fraction_and_shapes():
    d = generate(preset("default", n_samples=100, seed=3))
    assert sum(s.value == "test" for s in d.split) == 20
    assert d.vectors.shape == (100, 100) and d.labels.shape == (100, len(TRAITS))
    assert len(d.transcripts) == 100


def test_written_dataset_reloads(tmp_path):
    spec = preset("default", n_samples=12, seed=4, audio_seconds=2, visual_seconds=3)
    d = generate_synthetic(spec, tmp_path)
    table = load_table(tmp_path)
    order = [d.ids.index(v) for v in table.ids()]
    assert sorted(table.ids()) == sorted(d.ids)
    assert np.array_equal(table.matrix(), d.labels[order])
    vec = load_features(tmp_path, "vector")
    assert np.array_equal(vec.X, d.vectors[order])


def test_presets():
    assert set(PRESETS) == {"default", "zero-noise", "high-noise"}
    hn = preset("high-noise")
    assert hn.n_samples == 2000 and hn.vector_dim == 100
    with pytest.raises(ValueError, match="unknown preset"):
        preset("nope")


def test_trait_words_track_latent_scores():
    d = generate(preset("default", n_samples=300, seed=5))
    c = d.latent[:, OCEAN.index("C")]
    cuss = np.array([sum(t.split().count(w) for w in ("fuck", "fucking", "damn", "shit", "crap"))
                     for t in d.transcripts])
    assert np.corrcoef(c, cuss)[0, 1] < -0.3
