"""Correlation tables, informative stems, tree rendering, subset curves and report files."""

from __future__ import annotations

import csv
import io
import json
import logging
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .core import OCEAN, DegenerateError
from .ingest import atomic_write_text
from .models.linear import SubsetFit, best_subset_r2
from .models.tree import CLASSIFICATION, DecisionTreeModel
from .text import Vocabulary, importance_weights

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class CorrelationReport:
    r: np.ndarray  # (n_features, n_traits)
    p: np.ndarray
    significant: np.ndarray
    alpha: float
    n: int
    feature_names: tuple[str, ...]
    trait_names: tuple[str, ...]
    degenerate: np.ndarray  # (n_features,) or per-cell


def _pearson_columns(X, Y):
    Xc = X - X.mean(axis=0)
    Yc = Y - Y.mean(axis=0)
    sx = np.sqrt(np.sum(Xc * Xc, axis=0))
    sy = np.sqrt(np.sum(Yc * Yc, axis=0))
    num = Xc.T @ Yc
    denom = np.outer(sx, sy)
    degenerate = denom == 0
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.where(degenerate, 0.0, num / np.where(degenerate, 1.0, denom))
    return np.clip(r, -1.0, 1.0), degenerate


def pearson_pvalue(r, n: int) -> np.ndarray:
    """Two-sided p from t = r sqrt((n-2)/(1-r^2)) against Student-t(n-2)."""
    r = np.asarray(r, dtype=float)
    df = n - 2
    with np.errstate(divide="ignore"):
        t = np.abs(r) * np.sqrt(df / np.maximum(1.0 - r * r, 0.0))
    return 2.0 * stats.t.sf(t, df)


def correlation_matrix(features, labels, alpha: float = 0.05,
                       feature_names: Sequence[str] | None = None,
                       trait_names: Sequence[str] | None = None) -> CorrelationReport:
    X = np.asarray(features, dtype=float)
    Y = np.asarray(labels, dtype=float)
    X = X[:, None] if X.ndim == 1 else X
    Y = Y[:, None] if Y.ndim == 1 else Y
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"{X.shape[0]} feature rows vs {Y.shape[0]} label rows")
    n = X.shape[0]
    if n < 3:
        raise DegenerateError(f"need at least 3 rows for correlation tests, got {n}")
    r, degenerate = _pearson_columns(X, Y)
    p = np.where(degenerate, 1.0, pearson_pvalue(r, n))
    fn = tuple(feature_names) if feature_names is not None else tuple(f"f{j}" for j in range(X.shape[1]))
    tn = tuple(trait_names) if trait_names is not None else tuple(f"t{j}" for j in range(Y.shape[1]))
    return CorrelationReport(r, p, p < alpha, alpha, n, fn, tn, degenerate)


def correlations_csv(rep: CorrelationReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["feature", "trait", "r", "p", "significant"])
    for i, f in enumerate(rep.feature_names):
        for j, t in enumerate(rep.trait_names):
            w.writerow([f, t, repr(float(rep.r[i, j])), repr(float(rep.p[i, j])), int(rep.significant[i, j])])
    return buf.getvalue()


# -- informative stems -----------------------------------------------------

def top_informative_stems(nb_models, vocab: Vocabulary, k: int = 10) -> list[tuple[str, int, str, float]]:
    """Rows (trait, rank, stem, IW) with the k largest |IW| per trait.

    ``nb_models`` maps trait name to a fitted Bernoulli NB; a single model is
    reported under the trait name "I".
    """
    if not isinstance(nb_models, Mapping):
        nb_models = {"I": nb_models}
    if k > len(vocab):
        warnings.warn(f"k={k} exceeds vocabulary size {len(vocab)}; truncating", stacklevel=2)
    rows = []
    for trait, model in nb_models.items():
        ranked = importance_weights(model, vocab)[:max(k, 0)]
        rows += [(trait, rank, s, w) for rank, (s, w) in enumerate(ranked, start=1)]
    return rows


def iw_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trait", "rank", "stem", "iw"])
    for trait, rank, s, iw in rows:
        w.writerow([trait, rank, s, repr(float(iw))])
    return buf.getvalue()


# -- trees -----------------------------------------------------------------

def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _node_label(tree, node, names, class_names):
    if tree.is_leaf(node):
        v = tree.value[node]
        if tree.mode == CLASSIFICATION:
            return f"class {class_names.get(int(v), _fmt(v))} (n={tree.n_samples[node]})"
        return f"value {_fmt(v)} (n={tree.n_samples[node]})"
    f = int(tree.feature[node])
    name = names[f] if names is not None and f < len(names) else f"x{f}"
    return f"{name} <= {_fmt(tree.threshold[node])}"


def export_tree(tree: DecisionTreeModel, fmt: str = "text",
                feature_names: Sequence[str] | None = None,
                class_names: Mapping[int, str] | None = None) -> str:
    """Text (indented preorder, true branch first) or DOT rendering."""
    names = feature_names if feature_names is not None else tree.feature_names
    class_names = dict(class_names) if class_names is not None else {0: "R", 1: "S"}
    if fmt == "text":
        lines = []
        stack = [(0, 0)]
        while stack:
            node, depth = stack.pop()
            lines.append("  " * depth + _node_label(tree, node, names, class_names))
            if not tree.is_leaf(node):
                stack.append((int(tree.right[node]), depth + 1))
                stack.append((int(tree.left[node]), depth + 1))
        return "\n".join(lines) + "\n"
    if fmt in ("dot", "graph"):
        out = ["digraph Tree {", '  node [shape=box, fontname="Helvetica"];']
        for node in range(tree.n_nodes):
            label = _node_label(tree, node, names, class_names).replace('"', r"\"")
            out.append(f'  {node} [label="{label}"];')
        for node in range(tree.n_nodes):
            if not tree.is_leaf(node):
                out.append(f'  {node} -> {int(tree.left[node])} [label="yes"];')
                out.append(f'  {node} -> {int(tree.right[node])} [label="no"];')
        out.append("}")
        return "\n".join(out) + "\n"
    raise ValueError(f"unknown tree format {fmt!r}")


# -- best subset -----------------------------------------------------------

@dataclass(frozen=True)
class CurvePoint:
    k: int
    subset: tuple[str, ...]
    r2: float


def best_subset_curve(ocean, hirability=None, names: Sequence[str] = OCEAN) -> list[CurvePoint]:
    """In-sample R^2 of the best k-trait OLS model of I, k = 1..5.

    Accepts an AnnotationTable, or an (n, 5) OCEAN matrix plus I scores.
    """
    if hirability is None:
        X = ocean.matrix(OCEAN)
        y = ocean.matrix(("I",))[:, 0]
    else:
        X, y = np.asarray(ocean, dtype=float), np.asarray(hirability, dtype=float)
    fits: list[SubsetFit] = best_subset_r2(X, y)
    return [CurvePoint(f.k, tuple(names[c] for c in f.columns), f.r2) for f in fits]


def subset_csv(curve: Sequence[CurvePoint]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["k", "subset", "r2_in_sample"])
    for pt in curve:
        w.writerow([pt.k, "+".join(pt.subset), repr(float(pt.r2))])
    return buf.getvalue()


# -- report bundle ---------------------------------------------------------

def window_sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["window_s", "trait", "acc", "mae"])
    for r in rows:
        w.writerow([r["window_s"], r["trait"], repr(float(r["acc"])), repr(float(r["mae"]))])
    return buf.getvalue()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return obj


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=1, sort_keys=True) + "\n"


def emit_report_bundle(out_dir, reports=None, curve=None, correlations=None,
                       iw_rows=None, window_sweep=None, tree=None, summary=None,
                       tree_feature_names=None) -> list[Path]:
    """Write whichever artifacts are given under stable file names.

    ``summary.json`` is always written; it lists the other files plus any
    ``reports`` and ``summary`` content.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    files = {}
    if correlations is not None:
        files["correlations.csv"] = correlations_csv(correlations)
    if iw_rows is not None:
        files["iw_top10.csv"] = iw_csv(iw_rows)
    if curve is not None:
        files["subset_r2.csv"] = subset_csv(curve)
    if window_sweep is not None:
        files["window_sweep.csv"] = window_sweep_csv(window_sweep)
    if tree is not None:
        files["tree.dot"] = export_tree(tree, "dot", tree_feature_names)
    doc = {"files": sorted(files)}
    if reports:
        doc["reports"] = [r.to_dict() if hasattr(r, "to_dict") else r for r in reports]
    if curve is not None:
        doc["subset_r2_criterion"] = "in-sample"
    if summary:
        doc.update(summary)
    files["summary.json"] = dumps_json(doc)
    written = []
    for name in sorted(files):
        atomic_write_text(out / name, files[name])
        written.append(out / name)
    return written
