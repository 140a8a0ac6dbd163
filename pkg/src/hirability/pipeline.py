"""Direct and two-stage (behavior -> OCEAN -> hirability) experiments."""

from __future__ import annotations

import json
import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import audio as audio_mod
from . import visual as visual_mod
from .core import (OCEAN, TRAITS, EvaluationReport, Mode, Split, ValidationError, VideoSample, acc_metric,
                   mae, r_squared, sample_dataset)
from .ingest import (
    AnnotationTable, FormatError, fingerprint, load_annotations, load_transcripts, load_visual_track,
    load_wav,
)
from .models import (
    BERNOULLI, CLASSIFICATION, REGRESSION, SVC, SVR, fit_cart, fit_forest, fit_linear_sv,
    fit_logistic, fit_nb, fit_ols, fit_ridge,
)
from .text import build_vocab, preprocess, vectorize_corpus

log = logging.getLogger(__name__)

MODALITIES = ("text", "audio", "visual", "annotations", "vector")
MAX_MISSING_FRACTION = 0.05
CATEGORICAL_THRESHOLD = 0.5


# -- configuration -----------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    family: str
    params: dict = field(default_factory=dict)

    def describe(self) -> str:
        if not self.params:
            return self.family
        inner = ",".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{self.family}({inner})"


REGRESSORS = ("ols", "ridge", "svr", "cart", "forest")
CLASSIFIERS = ("logistic", "svc", "nb", "cart", "forest")


@dataclass(frozen=True)
class ExperimentConfig:
    modality: str = "vector"
    trait: str = "I"
    stage1_model: ModelSpec = ModelSpec("svr")
    stage2_model: ModelSpec | None = None
    target_mode: Mode = Mode.REGRESSION
    ocean_mode: str = "continuous"
    two_stage_protocol: str = "oof"
    folds: int = 5
    seed: int = 0
    window_s: int = 15
    n_jobs: int = 1

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise ValidationError(f"modality must be one of {MODALITIES}, got {self.modality!r}")
        if self.trait not in TRAITS:
            raise ValidationError(f"trait must be one of {TRAITS}, got {self.trait!r}")
        if not 2 <= self.window_s <= 15:
            raise ValidationError(f"window_s must be in [2, 15], got {self.window_s}")
        if self.two_stage_protocol not in ("oof", "gt"):
            raise ValidationError(f"two_stage_protocol must be 'oof' or 'gt', got {self.two_stage_protocol!r}")
        if self.two_stage_protocol == "oof" and self.folds < 2:
            raise ValidationError("out-of-fold protocol needs at least 2 folds")
        if self.ocean_mode not in ("continuous", "categorical"):
            raise ValidationError(f"ocean_mode must be 'continuous' or 'categorical', got {self.ocean_mode!r}")

    @property
    def stage2(self) -> ModelSpec:
        if self.stage2_model is not None:
            return self.stage2_model
        return ModelSpec("svr") if self.target_mode is Mode.REGRESSION else ModelSpec("svc")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["target_mode"] = self.target_mode.value
        d["stage2_model"] = asdict(self.stage2)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValidationError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("stage1_model", "stage2_model"):
            if isinstance(d.get(key), dict):
                d[key] = ModelSpec(d[key]["family"], dict(d[key].get("params", {})))
            elif isinstance(d.get(key), str):
                d[key] = ModelSpec(d[key])
        if "target_mode" in d and not isinstance(d["target_mode"], Mode):
            d["target_mode"] = parse_mode(d["target_mode"])
        return cls(**d)


def parse_mode(value) -> Mode:
    v = str(value).lower()
    if v in ("reg", "regression"):
        return Mode.REGRESSION
    if v in ("clf", "classification"):
        return Mode.CLASSIFICATION
    raise ValidationError(f"mode must be 'reg' or 'clf', got {value!r}")


def load_config(path) -> ExperimentConfig:
    """JSON or TOML (by extension); TOML may nest keys under [experiment]."""
    path = Path(path)
    text = path.read_text("utf-8")
    if path.suffix.lower() == ".toml":
        try:
            import tomllib
        except ModuleNotFoundError:  # Python < 3.11
            import tomli as tomllib
        try:
            d = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            raise FormatError(f"{path}: invalid TOML ({exc})") from None
    else:
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{path}: invalid JSON ({exc})") from None
    d = d.get("experiment", d)
    return ExperimentConfig.from_dict(d)


# -- datasets ----------------------------------------------------------------

@dataclass
class FeatureSet:
    """Aligned rows of features and IOCEAN labels for one modality."""

    ids: list[str]
    is_test: np.ndarray  # bool
    labels: np.ndarray  # (n, 6) in TRAITS order
    X: np.ndarray
    feature_names: tuple[str, ...]
    modality: str
    skipped: list[str] = field(default_factory=list)
    slices: list[np.ndarray] | None = None  # audio only: per-clip slice records
    vocab: object = None  # text only

    def fingerprint(self) -> str:
        return fingerprint(self.X, self.labels, self.is_test.astype(np.int8))

    def with_features(self, X, names, modality=None) -> "FeatureSet":
        return replace(self, X=np.asarray(X, dtype=float), feature_names=tuple(names),
                       modality=modality or self.modality)


def _labels_and_split(table: AnnotationTable, ids):
    labels = np.array([table.rows[i].as_array() for i in ids]).reshape(-1, 6)
    is_test = np.array([table.split[i] is Split.TEST for i in ids], dtype=bool)
    return labels, is_test


def _check_missing(missing: list[str], total: int, what: str):
    if total and len(missing) / total > MAX_MISSING_FRACTION:
        raise ValidationError(
            f"{len(missing)} of {total} samples lack {what} (> {MAX_MISSING_FRACTION:.0%}); "
            f"first missing: {missing[:5]}"
        )
    if missing:
        warnings.warn(f"skipping {len(missing)} samples without {what}: {missing[:5]}", stacklevel=3)


def annotation_features(table: AnnotationTable) -> FeatureSet:
    ids = table.ids()
    labels, is_test = _labels_and_split(table, ids)
    return FeatureSet(ids, is_test, labels, labels[:, 1:].copy(), OCEAN, "annotations")


def text_features(table: AnnotationTable, transcripts: dict[str, str], k: int = 5000) -> FeatureSet:
    """BoW counts; the vocabulary comes from training transcripts only."""
    ids = [i for i in table.ids() if i in transcripts]
    _check_missing([i for i in table.ids() if i not in transcripts], len(table), "transcripts")
    labels, is_test = _labels_and_split(table, ids)
    docs = [preprocess(transcripts[i]) for i in ids]
    vocab = build_vocab([d for d, t in zip(docs, is_test) if not t], k)
    X = vectorize_corpus(docs, vocab).astype(float)
    return FeatureSet(ids, is_test, labels, X, vocab.stems, "text", vocab=vocab)


def audio_features(table: AnnotationTable, clips: dict, window_s: int = 15) -> FeatureSet:
    """``clips`` maps id -> AudioClip or SliceFeatures."""
    ids, slices, missing = [], [], []
    for vid in table.ids():
        c = clips.get(vid)
        if c is None:
            missing.append(vid)
            continue
        sf = c if isinstance(c, audio_mod.SliceFeatures) else audio_mod.slice_features(c)
        ids.append(vid)
        slices.append(sf.values)
    _check_missing(missing, len(table), "audio")
    labels, is_test = _labels_and_split(table, ids)
    keep = [k for k, s in enumerate(slices) if s.shape[0] >= window_s]
    if len(keep) < len(ids):
        warnings.warn(f"{len(ids) - len(keep)} clips shorter than {window_s} s skipped", stacklevel=2)
    X = np.array([audio_mod.aggregate_slices(slices[k], window_s) for k in keep]).reshape(-1, 56)
    return FeatureSet([ids[k] for k in keep], is_test[keep], labels[keep], X, audio_mod.FEATURE_NAMES,
                      "audio", slices=[slices[k] for k in keep])


def visual_features(table: AnnotationTable, tracks: dict) -> FeatureSet:
    ids, rows, missing = [], [], []
    for vid in table.ids():
        tr = tracks.get(vid)
        if tr is None:
            missing.append(vid)
            continue
        ids.append(vid)
        rows.append(visual_mod.slice_motion_stats(tr))
    _check_missing(missing, len(table), "visual tracks")
    labels, is_test = _labels_and_split(table, ids)
    return FeatureSet(ids, is_test, labels, np.array(rows).reshape(-1, 10), visual_mod.FEATURE_NAMES, "visual")


def vector_features(table: AnnotationTable, vectors: dict[str, np.ndarray], names=None) -> FeatureSet:
    ids = [i for i in table.ids() if i in vectors]
    _check_missing([i for i in table.ids() if i not in vectors], len(table), "feature vectors")
    labels, is_test = _labels_and_split(table, ids)
    X = np.array([vectors[i] for i in ids], dtype=float)
    names = tuple(names) if names is not None else tuple(f"v{j}" for j in range(X.shape[1]))
    return FeatureSet(ids, is_test, labels, X, names, "vector")


def from_synthetic(data, modality: str = "vector") -> FeatureSet:
    table = data.annotation_table()
    if modality == "vector":
        return vector_features(table, dict(zip(data.ids, data.vectors)))
    if modality == "text":
        return text_features(table, dict(zip(data.ids, data.transcripts)))
    if modality == "annotations":
        return annotation_features(table)
    raise ValueError(f"in-memory synthetic data has no {modality!r} emissions; write it to disk first")


def load_table(root, invert_n: bool = False) -> AnnotationTable:
    root = Path(root)
    manifest = _manifest(root)
    ann = manifest.get("annotations", {"train": "train.csv", "test": "test.csv"})
    table = load_annotations(root / ann["train"], Split.TRAIN, invert_n)
    if ann.get("test") and (root / ann["test"]).exists():
        table = table.merged(load_annotations(root / ann["test"], Split.TEST, invert_n))
    return table


def sampled_table(table: AnnotationTable) -> AnnotationTable:
    """Keep only videos outside the 0.4 < I < 0.6 gray band."""
    kept = sample_dataset(VideoSample(vid, table.split[vid], tv) for vid, tv in table.rows.items())
    return AnnotationTable({s.id: s.labels for s in kept}, {s.id: s.split for s in kept})


def _manifest(root: Path) -> dict:
    p = root / "manifest.json"
    if p.exists():
        try:
            return json.loads(p.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{p}: invalid JSON ({exc})") from None
    return {}


def _read_vectors(path: Path) -> tuple[dict, tuple]:
    lines = path.read_text("utf-8").splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file")
    header = lines[0].split(",")
    out = {}
    for lineno, ln in enumerate(lines[1:], start=2):
        if not ln.strip():
            continue
        parts = ln.split(",")
        if len(parts) != len(header):
            raise FormatError(f"{path}: row {lineno} has {len(parts)} fields, expected {len(header)}")
        try:
            out[parts[0]] = np.array([float(v) for v in parts[1:]])
        except ValueError:
            raise FormatError(f"{path}: row {lineno} has a malformed number") from None
    return out, tuple(header[1:])


def load_features(root, modality: str, invert_n: bool = False, window_s: int = 15) -> FeatureSet:
    """Extract one modality from a dataset directory (generator layout).

    Gray-band videos are dropped before extraction.
    """
    root = Path(root)
    manifest = _manifest(root)
    table = sampled_table(load_table(root, invert_n))
    if modality == "annotations":
        return annotation_features(table)
    if modality == "text":
        src = root / (manifest.get("transcripts") or "transcripts")
        return text_features(table, load_transcripts(src, set(table.ids())))
    if modality == "audio":
        d = root / (manifest.get("audio") or "audio")
        clips = {vid: load_wav(d / f"{vid}.wav") for vid in table.ids() if (d / f"{vid}.wav").exists()}
        return audio_features(table, clips, window_s)
    if modality == "visual":
        d = root / (manifest.get("visual") or "visual")
        tracks = {vid: load_visual_track(d / f"{vid}.csv") for vid in table.ids() if (d / f"{vid}.csv").exists()}
        return visual_features(table, tracks)
    if modality == "vector":
        vecs, names = _read_vectors(root / (manifest.get("vectors") or "vectors.csv"))
        return vector_features(table, vecs, names)
    raise ValidationError(f"unknown modality {modality!r}")


# -- model fitting -----------------------------------------------------------

_DEFAULTS = {
    "svr": {"C": 1.0, "epsilon": 0.05, "epochs": 300, "step": 0.5},
    "svc": {"C": 1.0, "epochs": 300, "step": 0.5},
    "logistic": {"lam": 1e-3, "epochs": 500, "step": 1.0},
    "ridge": {"lam": 1.0},
    "nb": {"variant": BERNOULLI, "alpha": 1.0},
    "cart": {"max_depth": None, "min_leaf": 1},
    "forest": {"n_trees": 200, "max_depth": None, "min_leaf": 1},
}


def fit_model(spec: ModelSpec, X, y, mode: Mode, seed: int = 0):
    """Fit ``spec`` on (X, y). Classification targets must be {0, 1}."""
    p = {**_DEFAULTS.get(spec.family, {}), **spec.params}
    fam = spec.family
    if fam == "ols":
        return fit_ols(X, y)
    if fam == "ridge":
        return fit_ridge(X, y, **p)
    if fam in ("svr", "svc"):
        return fit_linear_sv(X, y, mode=SVR if fam == "svr" else SVC, seed=seed, **p)
    if fam == "logistic":
        return fit_logistic(X, y, **p)
    if fam == "nb":
        return fit_nb(X, y, **p)
    tree_mode = REGRESSION if mode is Mode.REGRESSION else CLASSIFICATION
    if fam == "cart":
        return fit_cart(X, y, tree_mode, **p)
    if fam == "forest":
        return fit_forest(X, y, tree_mode, seed=seed, **p)
    raise ValidationError(f"unknown model family {fam!r}")


def predict_target(model, X, mode: Mode) -> np.ndarray:
    """Regression outputs clipped to [0,1]; regressor scores thresholded for classification."""
    out = np.asarray(model.predict(X), dtype=float)
    if mode is Mode.REGRESSION:
        return np.clip(out, 0.0, 1.0)
    if not np.all(np.isin(out, (0.0, 1.0))):
        out = (out >= CATEGORICAL_THRESHOLD).astype(float)
    return out


def encode_target(scores: np.ndarray, mode: Mode) -> np.ndarray:
    if mode is Mode.REGRESSION:
        return np.asarray(scores, dtype=float)
    return (np.asarray(scores) >= CATEGORICAL_THRESHOLD).astype(float)


def _report(trait, mode, pred, truth, model_desc, seed, **extra) -> EvaluationReport:
    r2 = None
    if mode is Mode.REGRESSION and np.ptp(truth) > 0:
        r2 = r_squared(pred, truth)
    return EvaluationReport(trait, mode, mae(pred, truth), int(truth.size), model_desc, seed, r2, extra)


def _fold_ids(n: int, k: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x0F01D]))
    folds = np.empty(n, dtype=int)
    folds[rng.permutation(n)] = np.arange(n) % k
    return folds


def _map(fn: Callable, items: Sequence, n_jobs: int):
    if n_jobs == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n_jobs) as ex:
        return list(ex.map(fn, items))


# -- experiments -------------------------------------------------------------

@dataclass
class DirectResult:
    report: EvaluationReport
    model: object
    predictions: np.ndarray


def run_direct(config: ExperimentConfig, data: FeatureSet, model_spec: ModelSpec | None = None,
               trait: str | None = None) -> DirectResult:
    """Fit features -> trait on the training rows and score Acc on the test rows."""
    trait = trait or config.trait
    spec = model_spec or config.stage1_model
    mode = config.target_mode
    tr, te = ~data.is_test, data.is_test
    if not tr.any() or not te.any():
        raise ValidationError("need both training and test rows")
    j = TRAITS.index(trait)
    y_train = encode_target(data.labels[tr, j], mode)
    model = fit_model(spec, data.X[tr], y_train, mode, config.seed)
    # test labels are read only here, after training
    pred = predict_target(model, data.X[te], mode)
    truth = encode_target(data.labels[te, j], mode)
    rep = _report(trait, mode, pred, truth, f"direct:{data.modality}:{spec.describe()}", config.seed)
    return DirectResult(rep, model, pred)


@dataclass
class TwoStageResult:
    report: EvaluationReport
    stage1_reports: dict[str, EvaluationReport]
    stage1_models: dict[str, object]
    stage2_model: object
    stage2_train_inputs: np.ndarray
    stage2_test_inputs: np.ndarray
    predictions: np.ndarray


def run_two_stage(config: ExperimentConfig, data: FeatureSet, stage1_oracle: bool = False) -> TwoStageResult:
    """features -> OCEAN estimates (stage 1) -> trait (stage 2, usually I).

    Stage 1 always regresses the continuous OCEAN scores. Under the "oof"
    protocol stage 2 is trained on k-fold out-of-fold stage-1 estimates of
    the training rows; under "gt" on the annotated OCEAN scores. With
    ``stage1_oracle`` the annotated scores replace stage-1 output for both
    training and test rows.
    """
    mode = config.target_mode
    tr_idx = np.flatnonzero(~data.is_test)
    te_idx = np.flatnonzero(data.is_test)
    if tr_idx.size == 0 or te_idx.size == 0:
        raise ValidationError("need both training and test rows")
    Xtr, Xte = data.X[tr_idx], data.X[te_idx]
    ocean_cols = [TRAITS.index(t) for t in OCEAN]
    O_train = data.labels[tr_idx][:, ocean_cols]
    s1 = config.stage1_model
    seed = config.seed

    stage1_models, stage1_reports = {}, {}
    if stage1_oracle:
        est_train = O_train.copy()
        est_test = data.labels[te_idx][:, ocean_cols]
    else:
        fitted = _map(lambda t: fit_model(s1, Xtr, O_train[:, t], Mode.REGRESSION, seed), range(5), config.n_jobs)
        stage1_models = dict(zip(OCEAN, fitted))
        est_test = np.column_stack([predict_target(m, Xte, Mode.REGRESSION) for m in fitted])
        if config.two_stage_protocol == "oof":
            folds = _fold_ids(tr_idx.size, config.folds, seed)
            est_train = np.empty_like(O_train)

            def fold_fit(args):
                f, t = args
                inside = folds != f
                m = fit_model(s1, Xtr[inside], O_train[inside, t], Mode.REGRESSION, seed)
                return f, t, predict_target(m, Xtr[~inside], Mode.REGRESSION)

            jobs = [(f, t) for f in range(config.folds) for t in range(5)]
            for f, t, pred in _map(fold_fit, jobs, config.n_jobs):
                est_train[folds == f, t] = pred
        else:
            est_train = O_train.copy()

    if config.ocean_mode == "categorical":
        est_train = (est_train >= CATEGORICAL_THRESHOLD).astype(float)
        est_test = (est_test >= CATEGORICAL_THRESHOLD).astype(float)

    j = TRAITS.index(config.trait)
    y_train = encode_target(data.labels[tr_idx, j], mode)
    s2 = config.stage2
    model2 = fit_model(s2, est_train, y_train, mode, seed)
    pred = predict_target(model2, est_test, mode)

    # evaluation: the only access to test labels
    truth = encode_target(data.labels[te_idx, j], mode)
    if not stage1_oracle:
        for t, name in enumerate(OCEAN):
            truth_t = data.labels[te_idx, ocean_cols[t]]
            stage1_reports[name] = _report(name, Mode.REGRESSION, np.clip(
                predict_target(stage1_models[name], Xte, Mode.REGRESSION), 0, 1), truth_t,
                f"stage1:{data.modality}:{s1.describe()}", seed)
    desc = (f"two-stage:{data.modality}:{'oracle' if stage1_oracle else s1.describe()}"
            f"->{s2.describe()}:{config.two_stage_protocol}:{config.ocean_mode}")
    rep = _report(config.trait, mode, pred, truth, desc, seed)
    return TwoStageResult(rep, stage1_reports, stage1_models, model2, est_train, est_test, pred)


def window_sweep(config: ExperimentConfig, data: FeatureSet, windows: Sequence[int] = range(2, 16),
                 traits: Sequence[str] = TRAITS) -> list[dict]:
    """Acc of direct prediction for every (window, trait) from aggregated audio slices."""
    if data.slices is None:
        raise ValidationError("window sweep needs audio slice records")
    windows = list(windows)
    longest = max(windows)
    keep = np.array([s.shape[0] >= longest for s in data.slices], dtype=bool)
    if not keep.all():
        warnings.warn(f"{int((~keep).sum())} clips shorter than {longest} s skipped", stacklevel=2)
    slices = [s for s, k in zip(data.slices, keep) if k]
    base = replace(data, ids=[i for i, k in zip(data.ids, keep) if k], is_test=data.is_test[keep],
                   labels=data.labels[keep], slices=slices)
    rows = []
    for w in windows:
        X = np.array([audio_mod.aggregate_slices(s, w) for s in slices])
        fs = base.with_features(X, audio_mod.FEATURE_NAMES)
        cfg = replace(config, window_s=w)
        reps = _map(lambda t: run_direct(cfg, fs, trait=t).report, list(traits), config.n_jobs)
        for t, rep in zip(traits, reps):
            rows.append({"window_s": w, "trait": t, "acc": rep.acc, "mae": rep.mae})
    return rows


def mean_baseline(data: FeatureSet, trait: str = "I", mode: Mode = Mode.REGRESSION) -> float:
    """Acc of predicting the training mean (regression) or majority class."""
    j = TRAITS.index(trait)
    y_tr = encode_target(data.labels[~data.is_test, j], mode)
    truth = encode_target(data.labels[data.is_test, j], mode)
    if mode is Mode.REGRESSION:
        guess = y_tr.mean()
    else:
        guess = float(y_tr.mean() >= 0.5)
    return acc_metric(np.full(truth.size, guess), truth)
