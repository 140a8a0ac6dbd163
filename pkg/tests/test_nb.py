import numpy as np
import pytest
from hypothesis import given, strategies as st

from hirability.core import DegenerateError
from hirability.models import BERNOULLI, MULTINOMIAL, NaiveBayesModel, fit_nb
from hirability.text import build_vocab, vectorize_corpus

from .oracles import nb_bernoulli_posteriors


def test_separable_single_stems():
    X = np.array([[1, 0], [0, 1]])
    for variant in (BERNOULLI, MULTINOMIAL):
        m = fit_nb(X, [1, 0], variant=variant)
        assert m.predict(X).tolist() == [1.0, 0.0]


def test_posteriors_match_counting_oracle():
    docs = [["a", "b"], ["a"], ["b", "c"], ["c"], ["a", "c"], ["b"]]
    y = [1, 1, 1, 0, 0, 0]
    vocab = build_vocab(docs)
    m = fit_nb(vectorize_corpus(docs, vocab), y)
    got = m.log_posteriors(vectorize_corpus(docs, vocab))
    exp = np.array(nb_bernoulli_posteriors(docs, y, vocab.stems))
    assert np.abs(got - exp).max() < 1e-12


def test_uniform_corpus_ties_to_select():
    X = np.array([[1, 1], [1, 1]])
    m = fit_nb(X, [0, 1])
    lp = m.log_posteriors(X)
    assert lp[0, 0] == pytest.approx(lp[0, 1], abs=1e-15)
    assert m.predict(X).tolist() == [1.0, 1.0]


def test_multinomial_probabilities():
    X = np.array([[2, 0, 1], [0, 3, 0]])
    m = fit_nb(X, [1, 0], variant=MULTINOMIAL, alpha=1.0)
    assert np.exp(m.log_prob[1]) == pytest.approx(np.array([3, 1, 2]) / 6)
    assert np.exp(m.log_prob[0]) == pytest.approx(np.array([1, 4, 1]) / 6)


def test_errors():
    with pytest.raises(DegenerateError):
        fit_nb([[1, 0]], [1])
    with pytest.raises(ValueError):
        fit_nb([[1]], [1], alpha=0)
    with pytest.raises(ValueError):
        fit_nb([[-1], [1]], [0, 1], variant=MULTINOMIAL)


@given(st.integers(0, 2**31 - 1), st.floats(1e-6, 10.0), st.sampled_from([BERNOULLI, MULTINOMIAL]))
def test_log_posteriors_finite_and_roundtrip(seed, alpha, variant):
    rng = np.random.default_rng(seed)
    X = rng.integers(0, 4, size=(12, 7))
    y = np.r_[0, 1, rng.integers(0, 2, 10)]
    m = fit_nb(X, y, variant=variant, alpha=alpha)
    lp = m.log_posteriors(X)
    assert np.isfinite(lp).all()
    assert np.allclose(np.exp(lp).sum(axis=1), 1.0)
    again = NaiveBayesModel.from_payload(m.to_payload())
    assert np.array_equal(again.joint_log_likelihood(X), m.joint_log_likelihood(X))
