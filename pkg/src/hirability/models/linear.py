"""Linear models: OLS, ridge, logistic regression and linear SV machines.

Iterative learners use full-batch (sub)gradient descent with step halving,
so the training objective never increases from one epoch to the next.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from ..core import DegenerateError

OLS, RIDGE, LOGISTIC, SVR, SVC = "ols", "ridge", "logistic", "svr", "svc"
CLASSIFIERS = (LOGISTIC, SVC)


class SingularDesignError(DegenerateError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"rank-deficient design; collinear columns: {self.columns}")


@dataclass
class LinearModel:
    kind: str
    weights: np.ndarray
    bias: float
    mean: np.ndarray
    scale: np.ndarray
    meta: dict = field(default_factory=dict)

    family = "linear"

    def decision_function(self, X) -> np.ndarray:
        Z = np.ascontiguousarray((np.atleast_2d(np.asarray(X, dtype=float)) - self.mean) / self.scale)
        return Z @ self.weights + self.bias

    def predict_proba(self, X) -> np.ndarray:
        if self.kind != LOGISTIC:
            raise ValueError("probabilities only for logistic models")
        return _sigmoid(self.decision_function(X))

    def predict(self, X) -> np.ndarray:
        f = self.decision_function(X)
        if self.kind in CLASSIFIERS:
            # zero margin / p = 0.5 goes to Select
            return (f >= 0).astype(float)
        return f

    def to_payload(self) -> dict:
        return {
            "kind": self.kind,
            "weights": self.weights.tolist(),
            "bias": self.bias,
            "mean": self.mean.tolist(),
            "scale": self.scale.tolist(),
            "meta": self.meta,
        }

    @classmethod
    def from_payload(cls, d: dict) -> "LinearModel":
        return cls(d["kind"], np.asarray(d["weights"], dtype=float), float(d["bias"]),
                   np.asarray(d["mean"], dtype=float), np.asarray(d["scale"], dtype=float),
                   dict(d.get("meta", {})))


def _sigmoid(z):
    return np.exp(-np.logaddexp(0.0, -z))


def zscore_params(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


def _as_xy(X, y):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] != y.size:
        raise ValueError(f"{X.shape[0]} rows but {y.size} targets")
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    return X, y


# -- least squares ----------------------------------------------------------

_COLLINEAR_TOL = 1e-6


def collinear_columns(A: np.ndarray, tol: float = _COLLINEAR_TOL) -> list[int]:
    """Columns that are (numerically) linear combinations of earlier columns."""
    bad = []
    kept = []
    for j in range(A.shape[1]):
        col = A[:, j]
        norm = np.linalg.norm(col)
        if kept:
            B = A[:, kept]
            coef, *_ = np.linalg.lstsq(B, col, rcond=None)
            resid = np.linalg.norm(col - B @ coef)
        else:
            resid = norm
        if resid <= tol * norm:
            bad.append(j)
        else:
            kept.append(j)
    return bad


def _solve_normal(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    G = A.T @ A
    try:
        c, low = linalg.cho_factor(G, check_finite=True)
    except linalg.LinAlgError:
        raise SingularDesignError(collinear_columns(A)) from None
    # Cholesky can succeed on a numerically singular Gram matrix; c_jj^2 / G_jj
    # is the share of column j not explained by the columns before it
    unexplained = np.diag(c) ** 2 / np.maximum(np.diag(G), np.finfo(float).tiny)
    if unexplained.min() <= _COLLINEAR_TOL ** 2:
        raise SingularDesignError(collinear_columns(A))
    return linalg.cho_solve((c, low), A.T @ b)


def fit_ols(X, y) -> LinearModel:
    """Least squares with intercept via Cholesky on the normal equations.

    Column indices in a SingularDesignError refer to the design with the
    intercept at index 0 (so input column j is reported as j + 1).
    """
    X, y = _as_xy(X, y)
    n, p = X.shape
    if n <= p:
        raise DegenerateError(f"need n > p for OLS (n={n}, p={p})")
    A = np.hstack([np.ones((n, 1)), X])
    beta = _solve_normal(A, y)
    return LinearModel(OLS, beta[1:].copy(), float(beta[0]), np.zeros(p), np.ones(p))


def fit_ridge(X, y, lam: float = 1.0) -> LinearModel:
    X, y = _as_xy(X, y)
    mean, scale = zscore_params(X)
    Z = (X - mean) / scale
    p = Z.shape[1]
    G = Z.T @ Z + lam * np.eye(p)
    w = linalg.solve(G, Z.T @ (y - y.mean()), assume_a="pos")
    return LinearModel(RIDGE, w, float(y.mean()), mean, scale, {"lambda": lam})


@dataclass
class SubsetFit:
    k: int
    columns: tuple[int, ...]
    r2: float
    model: LinearModel


def best_subset_r2(X, y, max_k: int | None = None) -> list[SubsetFit]:
    """Exhaustive best-subset OLS; one max-in-sample-R^2 fit per subset size."""
    from ..core import r_squared

    X, y = _as_xy(X, y)
    p = X.shape[1]
    max_k = p if max_k is None else max_k
    out = []
    for k in range(1, max_k + 1):
        best = None
        for cols in itertools.combinations(range(p), k):
            Xs = np.ascontiguousarray(X[:, cols])
            m = fit_ols(Xs, y)
            r2 = r_squared(m.predict(Xs), y)
            if best is None or r2 > best.r2:
                best = SubsetFit(k, cols, r2, m)
        out.append(best)
    return out


# -- iterative learners -----------------------------------------------------

def logistic_objective(w, b, Z, y, lam):
    """Mean negative log-likelihood plus lam/2 ||w||^2, with its gradient."""
    f = Z @ w + b
    # log(1 + e^f) - y f
    loss = np.mean(np.logaddexp(0.0, f) - y * f) + 0.5 * lam * (w @ w)
    r = _sigmoid(f) - y
    gw = Z.T @ r / y.size + lam * w
    gb = r.mean()
    return loss, gw, gb


def sv_objective(w, b, Z, y, C, mode, epsilon=0.05):
    """Primal linear SV objective scaled by 1/(C n) and one subgradient.

    SVR: 1/(2Cn) ||w||^2 + mean(max(0, |y - f| - eps)).
    SVC: 1/(2Cn) ||w||^2 + mean(max(0, 1 - s f)) with s = 2y - 1.
    """
    n = y.size
    lam = 1.0 / (C * n)
    f = Z @ w + b
    if mode == SVR:
        r = f - y
        excess = np.abs(r) - epsilon
        loss = np.mean(np.maximum(excess, 0.0))
        g = np.where(excess > 0, np.sign(r), 0.0)
    elif mode == SVC:
        s = 2.0 * y - 1.0
        margin = 1.0 - s * f
        loss = np.mean(np.maximum(margin, 0.0))
        g = np.where(margin > 0, -s, 0.0)
    else:
        raise ValueError(f"unknown SV mode {mode!r}")
    obj = loss + 0.5 * lam * (w @ w)
    gw = Z.T @ g / n + lam * w
    gb = g.mean()
    return obj, gw, gb


def _descend(objective, p, epochs, step, b0=0.0, min_step=1e-12):
    w = np.zeros(p)
    b = float(b0)
    loss, gw, gb = objective(w, b)
    history = [loss]
    eta = step
    for _ in range(epochs):
        while eta >= min_step:
            w_new, b_new = w - eta * gw, b - eta * gb
            new_loss, ngw, ngb = objective(w_new, b_new)
            if new_loss <= loss:
                w, b, loss, gw, gb = w_new, b_new, new_loss, ngw, ngb
                eta = min(step, 2.0 * eta)
                break
            eta *= 0.5
        else:
            break
        history.append(loss)
    return w, b, history


def fit_logistic(X, y, lam: float = 1e-3, epochs: int = 500, step: float = 1.0) -> LinearModel:
    X, y = _as_xy(X, y)
    if not set(np.unique(y)) <= {0.0, 1.0}:
        raise ValueError("logistic regression needs labels in {0, 1}")
    mean, scale = zscore_params(X)
    Z = (X - mean) / scale
    w, b, hist = _descend(lambda w, b: logistic_objective(w, b, Z, y, lam), Z.shape[1], epochs, step)
    return LinearModel(LOGISTIC, w, b, mean, scale,
                       {"lambda": lam, "epochs": epochs, "step": step, "loss_history": hist})


def fit_linear_sv(X, y, mode: str = SVR, C: float = 1.0, epochs: int = 300,
                  step: float = 0.5, epsilon: float = 0.05, seed: int = 0) -> LinearModel:
    """Linear SVR (epsilon-insensitive) or SVC (hinge) in the primal.

    Full-batch, so ``seed`` does not influence the result; it is recorded
    for provenance only.
    """
    if C <= 0:
        raise ValueError("C must be positive")
    X, y = _as_xy(X, y)
    if mode == SVC and not set(np.unique(y)) <= {0.0, 1.0}:
        raise ValueError("SVC needs labels in {0, 1}")
    mean, scale = zscore_params(X)
    Z = (X - mean) / scale
    b0 = float(np.median(y)) if mode == SVR else 0.0
    w, b, hist = _descend(lambda w, b: sv_objective(w, b, Z, y, C, mode, epsilon),
                          Z.shape[1], epochs, step, b0=b0)
    return LinearModel(mode, w, b, mean, scale,
                       {"C": C, "epsilon": epsilon, "epochs": epochs, "step": step,
                        "seed": seed, "loss_history": hist})
