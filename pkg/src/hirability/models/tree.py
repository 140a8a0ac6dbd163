"""CART decision trees and random forests.

Splits send ``x <= threshold`` left. Candidate thresholds are midpoints
between consecutive distinct feature values. Equal-gain candidates are
resolved by the lowest feature index, then the lowest threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

REGRESSION = "reg"
CLASSIFICATION = "clf"

# gains within this relative margin count as ties, which keeps the chosen
# split stable when the target is rescaled
_TIE_RTOL = 1e-9


@dataclass
class DecisionTreeModel:
    mode: str
    feature: np.ndarray  # -1 at leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray
    max_depth: int | None = None
    min_leaf: int = 1
    feature_names: list[str] | None = None

    family = "cart"

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def depth(self) -> int:
        def rec(node):
            if self.is_leaf(node):
                return 0
            return 1 + max(rec(self.left[node]), rec(self.right[node]))
        return rec(0)

    def apply(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        node = np.zeros(X.shape[0], dtype=int)
        active = self.feature[node] >= 0
        while active.any():
            idx = np.nonzero(active)[0]
            nd = node[idx]
            go_left = X[idx, self.feature[nd]] <= self.threshold[nd]
            node[idx] = np.where(go_left, self.left[nd], self.right[nd])
            active = self.feature[node] >= 0
        return node

    def predict(self, X) -> np.ndarray:
        return self.value[self.apply(X)]

    def split_sequence(self) -> list[tuple[int, float]]:
        """(feature, threshold) of internal nodes in preorder."""
        out = []

        def rec(node):
            if self.is_leaf(node):
                return
            out.append((int(self.feature[node]), float(self.threshold[node])))
            rec(self.left[node])
            rec(self.right[node])
        rec(0)
        return out

    def to_payload(self) -> dict:
        return {
            "mode": self.mode,
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "n_samples": self.n_samples.tolist(),
            "max_depth": self.max_depth,
            "min_leaf": self.min_leaf,
            "feature_names": self.feature_names,
        }

    @classmethod
    def from_payload(cls, d: dict) -> "DecisionTreeModel":
        return cls(
            d["mode"],
            np.asarray(d["feature"], dtype=int),
            np.asarray(d["threshold"], dtype=float),
            np.asarray(d["left"], dtype=int),
            np.asarray(d["right"], dtype=int),
            np.asarray(d["value"], dtype=float),
            np.asarray(d["n_samples"], dtype=int),
            d.get("max_depth"),
            int(d.get("min_leaf", 1)),
            d.get("feature_names"),
        )


def _leaf_value(y, mode):
    if mode == REGRESSION:
        return float(y[0]) if np.all(y == y[0]) else float(y.mean())
    labels, counts = np.unique(y, return_counts=True)
    # majority; ties go to the larger label (Select = 1)
    return float(labels[np.flatnonzero(counts == counts.max())[-1]])


def _best_splits(Xs, y, mode, min_leaf, classes):
    """Per-column best gain and threshold; NaN gain where no split is allowed."""
    n, p = Xs.shape
    order = np.argsort(Xs, axis=0, kind="mergesort")
    xs = np.take_along_axis(Xs, order, axis=0)
    ys = y[order]
    # split position i puts xs[:i] left; valid where values change and leaves are big enough
    i = np.arange(1, n)
    valid = (xs[1:] > xs[:-1]) & (i >= min_leaf)[:, None] & (i <= n - min_leaf)[:, None]
    nl = i.astype(float)[:, None]
    nr = n - nl
    if mode == REGRESSION:
        cs = np.cumsum(ys, axis=0)
        cs2 = np.cumsum(ys * ys, axis=0)
        tot, tot2 = cs[-1], cs2[-1]
        parent = tot2 - tot * tot / n
        sl, sl2 = cs[:-1], cs2[:-1]
        sse_l = sl2 - sl * sl / nl
        sse_r = (tot2 - sl2) - (tot - sl) ** 2 / nr
        gain = (parent - sse_l - sse_r) / n
    else:
        onehot = (ys[:, :, None] == classes[None, None, :]).astype(float)
        cc = np.cumsum(onehot, axis=0)
        total = cc[-1]
        left = cc[:-1]
        right = total - left
        gini_parent = 1.0 - np.sum((total / n) ** 2, axis=1)
        gini_l = 1.0 - np.sum((left / nl[:, :, None]) ** 2, axis=2)
        gini_r = 1.0 - np.sum((right / nr[:, :, None]) ** 2, axis=2)
        gain = gini_parent - (nl * gini_l + nr * gini_r) / n
    gain = np.where(valid, gain, -np.inf)
    best = gain.max(axis=0)
    # first (lowest threshold) among near-ties
    k = np.argmax(gain >= (best - _TIE_RTOL * np.abs(best))[None, :], axis=0)
    cols = np.arange(p)
    thr = 0.5 * (xs[k, cols] + xs[k + 1, cols])
    ok = valid.any(axis=0)
    return np.where(ok, gain[k, cols], np.nan), thr


class _Builder:
    def __init__(self, mode, max_depth, min_leaf, max_features, rng):
        self.mode = mode
        self.max_depth = max_depth
        self.min_leaf = max(1, int(min_leaf))
        self.max_features = max_features
        self.rng = rng
        self.feature, self.threshold, self.left, self.right = [], [], [], []
        self.value, self.n_samples = [], []

    def _new_node(self, y):
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(_leaf_value(y, self.mode))
        self.n_samples.append(y.size)
        return len(self.feature) - 1

    def _candidate_features(self, p):
        if self.max_features is None or self.max_features >= p:
            return np.arange(p)
        return np.sort(self.rng.choice(p, size=self.max_features, replace=False))

    def build(self, X, y, classes):
        # iterative to avoid recursion limits on fully grown trees
        root = self._new_node(y)
        stack = [(root, np.arange(y.size), 0)]
        while stack:
            node, idx, depth = stack.pop()
            yy = y[idx]
            if idx.size < 2 * self.min_leaf or np.all(yy == yy[0]):
                continue
            if self.max_depth is not None and depth >= self.max_depth:
                continue
            best = None
            feats = self._candidate_features(X.shape[1])
            gains, thrs = _best_splits(X[np.ix_(idx, feats)], yy, self.mode, self.min_leaf, classes)
            for j, gain, thr in zip(feats, gains, thrs):
                if np.isnan(gain):
                    continue
                if best is None or gain > best[0] + _TIE_RTOL * abs(best[0]):
                    best = (float(gain), int(j), float(thr))
            if best is None or best[0] <= 0:
                continue
            _, j, thr = best
            mask = X[idx, j] <= thr
            li, ri = idx[mask], idx[~mask]
            lnode = self._new_node(y[li])
            rnode = self._new_node(y[ri])
            self.feature[node] = j
            self.threshold[node] = thr
            self.left[node] = lnode
            self.right[node] = rnode
            # push right first so left subtrees get lower node ids
            stack.append((rnode, ri, depth + 1))
            stack.append((lnode, li, depth + 1))

    def finish(self, feature_names):
        return DecisionTreeModel(
            self.mode,
            np.asarray(self.feature, dtype=int),
            np.asarray(self.threshold, dtype=float),
            np.asarray(self.left, dtype=int),
            np.asarray(self.right, dtype=int),
            np.asarray(self.value, dtype=float),
            np.asarray(self.n_samples, dtype=int),
            self.max_depth,
            self.min_leaf,
            feature_names,
        )


def _check(X, y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise ValueError(f"{X.shape[0]} rows but {y.size} targets")
    if y.size == 0:
        raise ValueError("empty training set")
    return X, y


def fit_cart(X, y, mode=REGRESSION, max_depth=None, min_leaf=1,
             max_features=None, rng=None, feature_names=None) -> DecisionTreeModel:
    X, y = _check(X, y)
    if mode not in (REGRESSION, CLASSIFICATION):
        raise ValueError(f"unknown mode {mode!r}")
    b = _Builder(mode, max_depth, min_leaf, max_features, rng)
    b.build(X, y, np.unique(y))
    return b.finish(list(feature_names) if feature_names is not None else None)


@dataclass
class RandomForestModel:
    mode: str
    trees: list[DecisionTreeModel]
    features_per_split: int
    seed: int
    meta: dict = field(default_factory=dict)

    family = "forest"

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def tree_predictions(self, X) -> np.ndarray:
        return np.vstack([t.predict(X) for t in self.trees])

    def predict(self, X) -> np.ndarray:
        P = self.tree_predictions(X)
        if self.mode == REGRESSION:
            return P.mean(axis=0)
        labels = np.unique(P)
        votes = np.vstack([(P == c).sum(axis=0) for c in labels])
        best = votes.max(axis=0)
        # ties to the larger label
        pick = votes.shape[0] - 1 - np.argmax((votes == best)[::-1], axis=0)
        return labels[pick]

    def to_payload(self) -> dict:
        return {
            "mode": self.mode,
            "features_per_split": self.features_per_split,
            "seed": self.seed,
            "meta": self.meta,
            "trees": [t.to_payload() for t in self.trees],
        }

    @classmethod
    def from_payload(cls, d: dict) -> "RandomForestModel":
        return cls(d["mode"], [DecisionTreeModel.from_payload(t) for t in d["trees"]],
                   int(d["features_per_split"]), int(d["seed"]), dict(d.get("meta", {})))


def default_features_per_split(p: int, mode: str) -> int:
    if mode == CLASSIFICATION:
        return max(1, math.ceil(math.sqrt(p)))
    return max(1, math.ceil(p / 3))


def tree_rng(seed: int, tree_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, tree_index]))


def fit_forest(X, y, mode=REGRESSION, n_trees=200, features_per_split=None,
               seed=0, max_depth=None, min_leaf=1) -> RandomForestModel:
    """Bagged CART ensemble; tree t draws from a stream keyed by (seed, t)."""
    if n_trees <= 0:
        raise ValueError("n_trees must be positive")
    X, y = _check(X, y)
    n, p = X.shape
    k = features_per_split or default_features_per_split(p, mode)
    trees = []
    for t in range(n_trees):
        rng = tree_rng(seed, t)
        boot = rng.integers(0, n, size=n)
        trees.append(fit_cart(X[boot], y[boot], mode, max_depth, min_leaf, k, rng))
    return RandomForestModel(mode, trees, k, seed,
                             {"n_trees": n_trees, "max_depth": max_depth, "min_leaf": min_leaf})
