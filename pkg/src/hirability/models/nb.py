"""Multinomial and Bernoulli Naive Bayes over count vectors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import DegenerateError

MULTINOMIAL = "multinomial"
BERNOULLI = "bernoulli"


@dataclass
class NaiveBayesModel:
    """Two-class NB. Row 0 of every table is Reject (0), row 1 is Select (1)."""

    variant: str
    alpha: float
    class_count: np.ndarray  # (2,)
    feature_count: np.ndarray  # (2, p) term totals or document presence counts
    log_prior: np.ndarray
    log_prob: np.ndarray  # (2, p) log P(term|class) or log P(present|class)
    log_neg_prob: np.ndarray | None = None  # Bernoulli only: log P(absent|class)

    family = "naive_bayes"

    def _features(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return (X > 0).astype(float) if self.variant == BERNOULLI else X

    def joint_log_likelihood(self, X) -> np.ndarray:
        X = self._features(X)
        if self.variant == BERNOULLI:
            jll = X @ (self.log_prob - self.log_neg_prob).T + self.log_neg_prob.sum(axis=1)
        else:
            jll = X @ self.log_prob.T
        return jll + self.log_prior

    def log_posteriors(self, X) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        m = jll.max(axis=1, keepdims=True)
        return jll - (m + np.log(np.exp(jll - m).sum(axis=1, keepdims=True)))

    def predict(self, X) -> np.ndarray:
        jll = self.joint_log_likelihood(X)
        # tie goes to Select
        return (jll[:, 1] >= jll[:, 0]).astype(float)

    def to_payload(self) -> dict:
        return {
            "variant": self.variant,
            "alpha": self.alpha,
            "class_count": self.class_count.tolist(),
            "feature_count": self.feature_count.tolist(),
        }

    @classmethod
    def from_payload(cls, d: dict) -> "NaiveBayesModel":
        return _build(d["variant"], float(d["alpha"]),
                      np.asarray(d["class_count"], dtype=float),
                      np.asarray(d["feature_count"], dtype=float))


def _build(variant, alpha, class_count, feature_count) -> NaiveBayesModel:
    log_prior = np.log(class_count) - np.log(class_count.sum())
    if variant == BERNOULLI:
        prob = (feature_count + alpha) / (class_count[:, None] + 2.0 * alpha)
        return NaiveBayesModel(variant, alpha, class_count, feature_count, log_prior,
                               np.log(prob), np.log1p(-prob))
    if variant == MULTINOMIAL:
        smoothed = feature_count + alpha
        log_prob = np.log(smoothed) - np.log(smoothed.sum(axis=1, keepdims=True))
        return NaiveBayesModel(variant, alpha, class_count, feature_count, log_prior, log_prob)
    raise ValueError(f"unknown NB variant {variant!r}")


def fit_nb(X, y, variant: str = BERNOULLI, alpha: float = 1.0) -> NaiveBayesModel:
    """Fit a Laplace-smoothed NB. ``y`` holds 1 for Select, 0 for Reject."""
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y).astype(int).ravel()
    if X.shape[0] != y.size:
        raise ValueError(f"{X.shape[0]} rows but {y.size} labels")
    if not set(np.unique(y)) <= {0, 1}:
        raise ValueError("labels must be 0 (Reject) or 1 (Select)")
    class_count = np.array([(y == 0).sum(), (y == 1).sum()], dtype=float)
    if (class_count == 0).any():
        raise DegenerateError("training set contains a single class")
    if (X < 0).any():
        raise ValueError("NB expects non-negative counts")
    F = (X > 0).astype(float) if variant == BERNOULLI else X
    feature_count = np.vstack([F[y == 0].sum(axis=0), F[y == 1].sum(axis=0)])
    return _build(variant, float(alpha), class_count, feature_count)


def presence_ratio(model: NaiveBayesModel) -> np.ndarray:
    """P(S|stem) / P(R|stem) per feature, from presence probabilities and priors."""
    if model.variant != BERNOULLI:
        raise ValueError("importance weights need a Bernoulli NB")
    log_ratio = (model.log_prob[1] + model.log_prior[1]) - (model.log_prob[0] + model.log_prior[0])
    return np.exp(log_ratio)


def signed_importance(ratio) -> np.ndarray:
    """rho >= 1 maps to rho; rho < 1 maps to -1/rho."""
    ratio = np.asarray(ratio, dtype=float)
    return np.where(ratio >= 1.0, ratio, -1.0 / ratio)
