import numpy as np
import pytest
from hypothesis import given, strategies as st

from hirability.core import (DegenerateError, HirabilityClass, Split, TraitVector, ValidationError,
                             VideoSample, acc_metric, binarize_trait, descriptive_stats,
                             hirability_class, mae, r_squared, sample_dataset)

unit = st.floats(0.0, 1.0, allow_nan=False)


def _sample(vid, i):
    return VideoSample(vid, Split.TRAIN, TraitVector(i, 0.5, 0.5, 0.5, 0.5, 0.5))


def test_trait_vector_rejects_out_of_range():
    with pytest.raises(ValidationError, match="I"):
        TraitVector(1.2, 0.5, 0.5, 0.5, 0.5, 0.5)
    with pytest.raises(ValidationError):
        TraitVector(0.5, float("nan"), 0.5, 0.5, 0.5, 0.5)


def test_gray_area_and_boundaries():
    assert hirability_class(0.5) is None
    assert hirability_class(0.40) is HirabilityClass.REJECT
    assert hirability_class(0.60) is HirabilityClass.SELECT
    kept = sample_dataset([_sample("a", 0.5), _sample("b", 0.4), _sample("c", 0.6), _sample("d", 0.41)])
    assert [(s.id, s.hclass) for s in kept] == [("b", HirabilityClass.REJECT), ("c", HirabilityClass.SELECT)]


def test_sample_dataset_names_bad_sample():
    bad = _sample("vid42", 0.7)
    object.__setattr__(bad.labels, "o", 3.0)
    with pytest.raises(ValidationError, match="vid42"):
        sample_dataset([bad])


@given(st.lists(unit, min_size=0, max_size=30))
def test_sample_dataset_idempotent(scores):
    samples = [_sample(f"v{k}", s) for k, s in enumerate(scores)]
    once = sample_dataset(samples)
    assert sample_dataset(once) == once
    assert all(s.labels.i <= 0.4 or s.labels.i >= 0.6 for s in once)


def test_acc_examples():
    t = np.array([0.2, 0.5, 0.9])
    assert acc_metric(t, t) == 1.0
    assert acc_metric(t + 0.1, t) == pytest.approx(0.9, abs=1e-12)
    assert acc_metric([1, 0, 1, 0], [1, 1, 0, 0]) == 0.5


def test_metric_length_mismatch():
    with pytest.raises(ValueError, match="length"):
        mae([1, 2], [1])
    with pytest.raises(ValueError):
        mae([], [])


@given(st.lists(st.tuples(unit, unit), min_size=1, max_size=40), st.randoms(use_true_random=False))
def test_acc_symmetric_and_permutation_invariant(pairs, rnd):
    p, t = map(np.array, zip(*pairs))
    assert acc_metric(p, t) == acc_metric(t, p)
    perm = list(range(len(p)))
    rnd.shuffle(perm)
    assert acc_metric(p[perm], t[perm]) == pytest.approx(acc_metric(p, t), abs=1e-12)


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=1, max_size=60))
def test_acc_on_binary_is_accuracy(pairs):
    p, t = map(np.array, zip(*pairs))
    assert abs(acc_metric(p, t) - np.mean(p == t)) <= 1e-12


def test_r_squared_examples():
    t = np.array([0.0, 1.0, 2.0])
    assert r_squared(t, t) == 1.0
    assert r_squared(np.full(3, t.mean()), t) == 0.0
    assert r_squared([0, 1, 1], t) == pytest.approx(0.5, abs=1e-15)
    with pytest.raises(DegenerateError):
        r_squared([1, 2], [3, 3])


@given(st.lists(st.tuples(unit, unit), min_size=2, max_size=30), st.randoms(use_true_random=False))
def test_r_squared_permutation_invariant(pairs, rnd):
    p, t = map(np.array, zip(*pairs))
    if np.ptp(t) < 1e-6:
        return
    perm = list(range(len(p)))
    rnd.shuffle(perm)
    assert r_squared(p[perm], t[perm]) == pytest.approx(r_squared(p, t), rel=1e-9, abs=1e-9)


def test_descriptive_stats_examples():
    s = descriptive_stats([0.3] * 7)
    assert s.iqr == 0 and s.frac_within_1sd == 1.0
    assert descriptive_stats([1, 2, 3, 4]).iqr == 1.5


def _percentile_oracle(x, q):
    x = sorted(x)
    pos = (len(x) - 1) * q
    lo = int(np.floor(pos))
    hi = min(lo + 1, len(x) - 1)
    return x[lo] + (x[hi] - x[lo]) * (pos - lo)


@given(st.lists(unit, min_size=1, max_size=50))
def test_iqr_matches_interpolation_oracle(xs):
    expect = _percentile_oracle(xs, 0.75) - _percentile_oracle(xs, 0.25)
    assert descriptive_stats(xs).iqr == pytest.approx(expect, abs=1e-12)


@given(st.lists(unit, min_size=1, max_size=40), st.floats(0.01, 100.0))
def test_descriptive_stats_scale(xs, k):
    a = descriptive_stats(xs)
    b = descriptive_stats(np.array(xs) * k)
    assert b.iqr == pytest.approx(k * a.iqr, rel=1e-9, abs=1e-12)
    assert b.sd == pytest.approx(k * a.sd, rel=1e-9, abs=1e-12)
    assert b.frac_within_1sd == a.frac_within_1sd


def test_binarize():
    assert binarize_trait(0.5) == 1
    assert binarize_trait(0.49) == 0
    assert binarize_trait(0.73) == 1
    with pytest.raises(ValidationError):
        binarize_trait(1.5)
