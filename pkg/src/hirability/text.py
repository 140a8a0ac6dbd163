"""Transcript -> bag-of-words vectors over a stemmed content-word vocabulary."""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .models.nb import NaiveBayesModel, presence_ratio, signed_importance
from .porter import stem

CONTENT_POS = frozenset({"adj", "adv", "verb", "noun"})
_WORD = re.compile(r"[a-z]+")


def _resource_lines(name: str) -> list[str]:
    text = resources.files("hirability").joinpath("resources", name).read_text("utf-8")
    return [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


@lru_cache(maxsize=None)
def default_stopwords() -> frozenset[str]:
    return frozenset(_resource_lines("stopwords.txt"))


def parse_lexicon(lines: Iterable[str]) -> dict[str, frozenset[str]]:
    lex = {}
    for ln in lines:
        word, _, pos = ln.partition("\t")
        lex[word.strip().lower()] = frozenset(p.strip() for p in pos.split(",") if p.strip())
    return lex


@lru_cache(maxsize=None)
def default_lexicon() -> Mapping[str, frozenset[str]]:
    return parse_lexicon(_resource_lines("pos_lexicon.tsv"))


def load_lexicon(path) -> dict[str, frozenset[str]]:
    lines = Path(path).read_text("utf-8").splitlines()
    return parse_lexicon(ln for ln in lines if ln.strip() and not ln.startswith("#"))


def tokenize(text: str) -> list[str]:
    return _WORD.findall(text.lower())


def preprocess(text: str, pos_lexicon: Mapping[str, frozenset[str]] | None = None,
               stopwords: frozenset[str] | None = None) -> list[str]:
    """Lowercase, drop stopwords and non-content words, Porter-stem.

    Words missing from the lexicon are kept.
    """
    lex = default_lexicon() if pos_lexicon is None else pos_lexicon
    stop = default_stopwords() if stopwords is None else stopwords
    out = []
    for tok in tokenize(text):
        if tok in stop:
            continue
        pos = lex.get(tok)
        if pos is not None and not (pos & CONTENT_POS):
            continue
        out.append(stem(tok))
    return out


@dataclass(frozen=True)
class Vocabulary:
    stems: tuple[str, ...]
    doc_freq: tuple[int, ...]
    total_freq: tuple[int, ...]
    index: dict = field(init=False, compare=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {s: i for i, s in enumerate(self.stems)})

    def __len__(self):
        return len(self.stems)

    def to_json(self) -> str:
        return json.dumps({"stems": list(self.stems), "doc_freq": list(self.doc_freq),
                           "total_freq": list(self.total_freq)}, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "Vocabulary":
        d = json.loads(text)
        return cls(tuple(d["stems"]), tuple(d["doc_freq"]), tuple(d["total_freq"]))


def build_vocab(corpus: Sequence[Sequence[str]], k: int = 5000) -> Vocabulary:
    """Top-k stems by total count; equal counts are ordered lexicographically."""
    if k <= 0:
        raise ValueError("k must be positive")
    if len(corpus) == 0:
        raise ValueError("empty corpus")
    total = Counter()
    docs = Counter()
    for doc in corpus:
        total.update(doc)
        docs.update(set(doc))
    ranked = sorted(total.items(), key=lambda kv: (-kv[1], kv[0]))[:k]
    stems = tuple(s for s, _ in ranked)
    return Vocabulary(stems, tuple(docs[s] for s in stems), tuple(total[s] for s in stems))


def vectorize(stems: Iterable[str], vocab: Vocabulary) -> np.ndarray:
    v = np.zeros(len(vocab), dtype=np.int64)
    idx = vocab.index
    for s in stems:
        j = idx.get(s)
        if j is not None:
            v[j] += 1
    return v


def vectorize_corpus(corpus: Sequence[Sequence[str]], vocab: Vocabulary) -> np.ndarray:
    if not corpus:
        return np.zeros((0, len(vocab)), dtype=np.int64)
    return np.vstack([vectorize(doc, vocab) for doc in corpus])


def importance_weights(nb_model: NaiveBayesModel | None, vocab: Vocabulary) -> list[tuple[str, float]]:
    """Signed selection/rejection likelihood ratio per stem, largest |IW| first.

    Equal magnitudes are ordered by stem so the ranking does not depend on
    vocabulary order.
    """
    if nb_model is None:
        raise RuntimeError("importance weights need a fitted Bernoulli NB model")
    if nb_model.log_prob.shape[1] != len(vocab):
        raise ValueError("model and vocabulary sizes differ")
    iw = signed_importance(presence_ratio(nb_model))
    pairs = [(s, float(w)) for s, w in zip(vocab.stems, iw)]
    pairs.sort(key=lambda sw: (-abs(sw[1]), sw[0]))
    return pairs
