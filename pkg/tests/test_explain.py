import numpy as np
import pytest
from hypothesis import given, strategies as st

from hirability.core import OCEAN, DegenerateError
from hirability.explain import (best_subset_curve, correlation_matrix, emit_report_bundle,
                                export_tree, pearson_pvalue, top_informative_stems)
from hirability.models import fit_nb, fit_ols
from hirability.models.tree import CLASSIFICATION, fit_cart
from hirability.text import Vocabulary, build_vocab, vectorize_corpus

from .oracles import pearson

seeds = st.integers(0, 2**31 - 1)


def test_self_and_orthogonal_columns():
    x = np.array([1.0, -1.0, 0.0])
    y = np.array([1.0, 1.0, -2.0])
    rep = correlation_matrix(np.column_stack([x, y]), np.column_stack([x, y]))
    assert rep.r[0, 1] == pytest.approx(0.0, abs=1e-15)
    z = np.random.default_rng(0).normal(size=10)
    rep = correlation_matrix(z, z)
    assert rep.r[0, 0] == pytest.approx(1.0, abs=1e-15) and rep.p[0, 0] < 1e-12


@given(seeds)
def test_r_matches_textbook_formula(seed):
    rng = np.random.default_rng(seed)
    X, Y = rng.normal(size=(10, 3)), rng.normal(size=(10, 2))
    rep = correlation_matrix(X, Y)
    for i in range(3):
        for j in range(2):
            assert abs(rep.r[i, j] - pearson(X[:, i].tolist(), Y[:, j].tolist())) <= 1e-12


def test_pvalues_decrease_with_abs_r():
    r = np.linspace(0.0, 0.99, 50)
    p = pearson_pvalue(r, 20)
    assert np.all(np.diff(p) < 0)
    assert pearson_pvalue(-0.5, 20) == pearson_pvalue(0.5, 20)


@given(seeds, st.floats(0.01, 100), st.floats(-100, 100))
def test_affine_invariance(seed, a, b):
    rng = np.random.default_rng(seed)
    X, Y = rng.normal(size=(15, 2)), rng.normal(size=(15, 2))
    r = correlation_matrix(X, Y).r
    assert np.allclose(correlation_matrix(a * X + b, Y).r, r, atol=1e-9)
    assert np.allclose(correlation_matrix(-X, Y).r, -r, atol=1e-12)


def test_constant_column_is_degenerate():
    X = np.column_stack([np.ones(8), np.arange(8.0)])
    rep = correlation_matrix(X, np.arange(8.0))
    assert rep.degenerate[0, 0] and rep.r[0, 0] == 0.0 and rep.p[0, 0] == 1.0
    assert not rep.significant[0, 0]
    assert rep.r[1, 0] == pytest.approx(1.0)


def test_needs_three_rows():
    with pytest.raises(DegenerateError):
        correlation_matrix([[1.0], [2.0]], [1.0, 2.0])


def _toy():
    docs = [["great", "team"], ["great", "plan"], ["great"], ["cuss", "plan"], ["team"], ["cuss"]]
    y = [1, 1, 1, 0, 0, 0]
    vocab = build_vocab(docs)
    return fit_nb(vectorize_corpus(docs, vocab), y), vocab, docs, y


def test_select_only_stem_ranks_first():
    model, vocab, *_ = _toy()
    rows = top_informative_stems(model, vocab, k=3)
    assert rows[0][2] in ("great", "cuss")
    # great: (3+1)/(3+2) vs (0+1)/(3+2) -> 4
    assert dict((s, w) for _, _, s, w in rows)["great"] == pytest.approx(4.0)
    assert [r[1] for r in rows] == [1, 2, 3]
    assert top_informative_stems(model, vocab, k=0) == []


def test_stem_ranking_ignores_vocab_order():
    model, vocab, docs, y = _toy()
    rev = Vocabulary(vocab.stems[::-1], vocab.doc_freq[::-1], vocab.total_freq[::-1])
    model_r = fit_nb(vectorize_corpus(docs, rev), y)
    assert top_informative_stems(model, vocab, 4) == top_informative_stems(model_r, rev, 4)


def test_large_k_warns():
    model, vocab, *_ = _toy()
    with pytest.warns(UserWarning):
        rows = top_informative_stems({"C": model}, vocab, k=50)
    assert len(rows) == len(vocab) and rows[0][0] == "C"


def test_tree_rendering():
    X = np.arange(10.0)[:, None]
    tree = fit_cart(X, (X[:, 0] >= 5).astype(float), CLASSIFICATION)
    text = export_tree(tree, "text", ["E"])
    assert text.splitlines() == ["E <= 4.5", "  class R (n=5)", "  class S (n=5)"]
    dot = export_tree(tree, "dot", ["E"])
    assert dot == export_tree(tree, "dot", ["E"])
    assert dot.startswith("digraph") and '0 -> 1 [label="yes"]' in dot
    with pytest.raises(ValueError):
        export_tree(tree, "svg")


def test_subset_curve_single_driver():
    rng = np.random.default_rng(0)
    O = rng.uniform(0, 1, size=(50, 5))
    curve = best_subset_curve(O, 0.2 + 0.6 * O[:, 2])
    assert curve[0].subset == ("E",)
    assert curve[0].r2 == pytest.approx(1.0)
    assert [c.k for c in curve] == [1, 2, 3, 4, 5]


@given(seeds)
def test_subset_curve_monotone_and_full(seed):
    rng = np.random.default_rng(seed)
    O, y = rng.uniform(size=(30, 5)), rng.uniform(size=30)
    curve = best_subset_curve(O, y)
    r2 = [c.r2 for c in curve]
    assert all(b >= a for a, b in zip(r2, r2[1:]))
    m = fit_ols(O, y)
    resid = y - m.predict(O)
    assert r2[-1] == 1 - np.sum(resid ** 2) / np.sum((y - y.mean()) ** 2)
    assert curve[-1].subset == OCEAN


def test_report_bundle(tmp_path):
    only = emit_report_bundle(tmp_path / "a")
    assert [p.name for p in only] == ["summary.json"]

    rng = np.random.default_rng(1)
    O, y = rng.uniform(size=(30, 5)), rng.uniform(size=30)
    model, vocab, *_ = _toy()
    kwargs = dict(
        curve=best_subset_curve(O, y),
        correlations=correlation_matrix(O, y[:, None]),
        iw_rows=top_informative_stems(model, vocab, k=3),
        window_sweep=[{"window_s": 2, "trait": "I", "acc": 0.9, "mae": 0.1}],
        tree=fit_cart(O, y, max_depth=2),
        tree_feature_names=OCEAN,
    )
    files = emit_report_bundle(tmp_path / "b", **kwargs)
    assert sorted(p.name for p in files) == sorted(
        ["correlations.csv", "iw_top10.csv", "subset_r2.csv", "window_sweep.csv", "tree.dot", "summary.json"])
    emit_report_bundle(tmp_path / "c", **kwargs)
    for p in files:
        assert p.read_bytes() == (tmp_path / "c" / p.name).read_bytes()
    assert "r2_in_sample" in (tmp_path / "b" / "subset_r2.csv").read_text()
