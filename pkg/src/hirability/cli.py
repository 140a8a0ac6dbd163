"""Command-line entry point: ``hirability <subcommand> [flags]``.

Exit codes: 0 success, 1 validation error (bad flag, config, data or
artifact), 2 I/O error (missing or unwritable file).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .core import (OCEAN, TRAITS, DegenerateError, HirabilityClass, Split, TooShortError, ValidationError,
                   hirability_class)
from .explain import (best_subset_curve, correlation_matrix, dumps_json, emit_report_bundle,
                      export_tree, top_informative_stems)
from .ingest import (ArtifactError, FormatError, ModelArtifact, atomic_write_text, load_model,
                     save_model)
from .models import SingularDesignError, fit_cart, fit_nb
from .models.tree import REGRESSION
from .pipeline import (MODALITIES, ExperimentConfig, FeatureSet, ModelSpec, encode_target,
                       fit_model, load_config, load_features, load_table, parse_mode,
                       predict_target, run_direct, run_two_stage, sampled_table, window_sweep)
from .synth import PRESETS, generate_synthetic, preset

log = logging.getLogger("hirability")

EXTRACTOR_VERSION = "1"
MODEL_FILE = "model.json"


class UsageError(ValidationError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# -- configuration -----------------------------------------------------------

def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    over = {}
    if getattr(args, "modality", None):
        over["modality"] = args.modality
    if getattr(args, "trait", None):
        over["trait"] = args.trait
    if getattr(args, "mode", None):
        over["target_mode"] = parse_mode(args.mode)
    if getattr(args, "two_stage_protocol", None):
        over["two_stage_protocol"] = args.two_stage_protocol
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "model", None):
        over["stage1_model"] = ModelSpec(args.model)
    if getattr(args, "window", None) is not None:
        over["window_s"] = args.window
    return replace(cfg, **over) if over else cfg


def _data_root(args) -> Path:
    if not args.data:
        raise UsageError("--data is required: path to a dataset directory")
    root = Path(args.data)
    if not root.is_dir():
        raise FileNotFoundError(f"--data {root}: no such directory")
    return root


def _out(args) -> Path:
    if not args.out:
        raise UsageError(f"{args.command}: --out is required")
    return Path(args.out)


# -- feature cache -------------------------------------------------------------

def _source_files(root: Path, modality: str) -> list[Path]:
    manifest = root / "manifest.json"
    files = [p for p in (manifest, root / "train.csv", root / "test.csv") if p.exists()]
    sub = {"text": "transcripts", "audio": "audio", "visual": "visual"}.get(modality)
    if manifest.exists():
        doc = json.loads(manifest.read_text("utf-8"))
        ann = doc.get("annotations") or {}
        files += [root / v for v in ann.values() if v and (root / v).exists()]
        if sub:
            sub = doc.get(sub if modality == "text" else modality) or sub
        if modality == "vector":
            files.append(root / (doc.get("vectors") or "vectors.csv"))
    elif modality == "vector":
        files.append(root / "vectors.csv")
    if sub and (root / sub).is_dir():
        files += sorted(p for p in (root / sub).iterdir() if p.is_file())
    return sorted(set(files))


def cache_key(root: Path, modality: str, invert_n: bool, window_s: int) -> str:
    """Content address of one extraction: input bytes plus extractor settings."""
    h = hashlib.sha256()
    h.update(f"v{EXTRACTOR_VERSION}|{modality}|{int(invert_n)}|{window_s}".encode())
    for p in _source_files(root, modality):
        h.update(p.relative_to(root).as_posix().encode())
        h.update(hashlib.sha256(p.read_bytes()).digest())
    return h.hexdigest()[:20]


def features_csv(fs: FeatureSet) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["video_id", "split", *TRAITS, *fs.feature_names])
    for k, vid in enumerate(fs.ids):
        split = Split.TEST.value if fs.is_test[k] else Split.TRAIN.value
        w.writerow([vid, split, *map(repr, fs.labels[k].tolist()), *map(repr, fs.X[k].tolist())])
    return buf.getvalue()


def read_features_csv(path: Path, modality: str) -> FeatureSet:
    rows = list(csv.reader(path.read_text("utf-8").splitlines()))
    if not rows:
        raise FormatError(f"{path}: empty feature file")
    names = tuple(rows[0][2 + len(TRAITS):])
    body = rows[1:]
    ids = [r[0] for r in body]
    is_test = np.array([r[1] == Split.TEST.value for r in body], dtype=bool)
    vals = np.array([[float(v) for v in r[2:]] for r in body]).reshape(len(body), -1)
    return FeatureSet(ids, is_test, vals[:, :len(TRAITS)], vals[:, len(TRAITS):], names, modality)


def cached_features(root: Path, cfg: ExperimentConfig, invert_n: bool, cache_dir: Path | None):
    """Features for ``cfg.modality``; text keeps its vocabulary so it bypasses the cache."""
    if cache_dir is None or cfg.modality == "text":
        return load_features(root, cfg.modality, invert_n, cfg.window_s), None
    path = cache_dir / f"{cfg.modality}-{cache_key(root, cfg.modality, invert_n, cfg.window_s)}.csv"
    if path.exists():
        log.info("feature cache hit: %s", path)
        return read_features_csv(path, cfg.modality), path
    fs = load_features(root, cfg.modality, invert_n, cfg.window_s)
    atomic_write_text(path, features_csv(fs))
    return fs, path


def _cache_dir(args) -> Path | None:
    if getattr(args, "no_cache", False):
        return None
    if getattr(args, "cache", None):
        return Path(args.cache)
    return _out(args) / "cache"


# -- subcommands ---------------------------------------------------------------

def cmd_ingest(args) -> dict:
    root = _data_root(args)
    table = load_table(root, args.invert_n)
    n_test = sum(s is Split.TEST for s in table.split.values())
    counts = {"videos": len(table.rows), "train": len(table.rows) - n_test, "test": n_test}
    sampled = sampled_table(table)
    for split in Split:
        i = [tv.i for vid, tv in sampled.rows.items() if sampled.split[vid] is split]
        counts[f"sampled_{split.value}"] = len(i)
        counts[f"sampled_{split.value}_select"] = sum(hirability_class(v) is HirabilityClass.SELECT for v in i)
    for modality in ("text", "audio", "visual"):
        sub = {"text": "transcripts"}.get(modality, modality)
        d = root / sub
        ext = {"text": ".txt", "audio": ".wav", "visual": ".csv"}[modality]
        if d.is_dir():
            have = {p.stem for p in d.glob(f"*{ext}")}
            counts[f"{modality}_present"] = len(have & set(table.ids()))
    doc = {"dataset": "ok", "counts": counts}
    if args.out:
        atomic_write_text(_out(args) / "ingest.json", dumps_json(doc))
    print(dumps_json(doc), end="")
    return doc


def cmd_features(args) -> dict:
    root = _data_root(args)
    cfg = replace(_config(args), modality=args.feature_modality)
    out = _out(args)
    fs, cached = cached_features(root, cfg, args.invert_n, _cache_dir(args))
    target = out / f"features_{cfg.modality}.csv"
    atomic_write_text(target, features_csv(fs))
    print(f"wrote {target} ({len(fs.ids)} rows x {fs.X.shape[1]} features)")
    return {"path": str(target), "rows": len(fs.ids)}


def cmd_train(args) -> dict:
    root = _data_root(args)
    cfg = _config(args)
    out = _out(args)
    fs, _ = cached_features(root, cfg, args.invert_n, _cache_dir(args))
    tr = ~fs.is_test
    j = TRAITS.index(cfg.trait)
    y = encode_target(fs.labels[tr, j], cfg.target_mode)
    model = fit_model(cfg.stage1_model, fs.X[tr], y, cfg.target_mode, cfg.seed)
    art = ModelArtifact(
        model, cfg.trait,
        {"config": cfg.to_dict(), "invert_n": bool(args.invert_n)},
        list(fs.feature_names), fs.fingerprint(),
        clip_output=cfg.target_mode.value == "reg",
    )
    path = save_model(art, out / MODEL_FILE)
    print(f"wrote {path}")
    return {"path": str(path)}


def cmd_eval(args) -> dict:
    root = _data_root(args)
    out = _out(args)
    mpath = Path(args.model_path) if args.model_path else out / MODEL_FILE
    if not mpath.exists():
        raise ValidationError(f"no trained model at {mpath}; run `hirability train --out {out}` first")
    art = load_model(mpath)
    cfg = ExperimentConfig.from_dict(art.hyperparameters["config"])
    fs, _ = cached_features(root, cfg, art.hyperparameters.get("invert_n", False), _cache_dir(args))
    if list(fs.feature_names) != list(art.input_schema):
        raise ValidationError(f"{mpath}: feature schema does not match the {cfg.modality} features of {root}")
    te = fs.is_test
    j = TRAITS.index(cfg.trait)
    pred = predict_target(art.model, fs.X[te], cfg.target_mode)
    truth = encode_target(fs.labels[te, j], cfg.target_mode)
    from .pipeline import _report
    rep = _report(cfg.trait, cfg.target_mode, pred, truth,
                  f"direct:{cfg.modality}:{cfg.stage1_model.describe()}", cfg.seed)
    doc = {"report": rep.to_dict(), "model": mpath.name}
    atomic_write_text(out / "eval.json", dumps_json(doc))
    print(f"{cfg.trait} Acc = {rep.acc:.4f} (n={rep.n_test})")
    return doc


def cmd_two_stage(args) -> dict:
    root = _data_root(args)
    cfg = _config(args)
    out = _out(args)
    fs, _ = cached_features(root, cfg, args.invert_n, _cache_dir(args))
    direct = run_direct(cfg, fs)
    two = run_two_stage(cfg, fs, stage1_oracle=args.oracle)
    doc = {
        "config": cfg.to_dict(),
        "input_fingerprint": fs.fingerprint(),
        "direct": direct.report.to_dict(),
        "two_stage": two.report.to_dict(),
        "stage1": {k: v.to_dict() for k, v in two.stage1_reports.items()},
        "direct_acc": direct.report.acc,
        "two_stage_acc": two.report.acc,
    }
    atomic_write_text(out / "summary.json", dumps_json(doc))
    print(f"direct Acc = {direct.report.acc:.4f}  two-stage Acc = {two.report.acc:.4f}")
    return doc


def cmd_sweep(args) -> dict:
    root = _data_root(args)
    cfg = replace(_config(args), modality="audio")
    out = _out(args)
    if not 2 <= args.min_window <= args.max_window <= 15:
        raise UsageError("--min-window/--max-window must satisfy 2 <= min <= max <= 15")
    fs = load_features(root, "audio", args.invert_n, args.max_window)
    traits = [args.trait] if args.trait else list(TRAITS)
    rows = window_sweep(cfg, fs, range(args.min_window, args.max_window + 1), traits)
    emit_report_bundle(out, window_sweep=rows, summary={"config": cfg.to_dict(), "sweep_points": len(rows)})
    print(f"wrote {out / 'window_sweep.csv'} ({len(rows)} points)")
    return {"rows": rows}


def cmd_explain(args) -> dict:
    root = _data_root(args)
    cfg = _config(args)
    out = _out(args)
    table = sampled_table(load_table(root, args.invert_n))
    train_ids = [i for i in table.ids() if table.split[i] is Split.TRAIN]
    train_table = type(table)({i: table.rows[i] for i in train_ids}, {i: Split.TRAIN for i in train_ids})
    curve = best_subset_curve(train_table)
    O = train_table.matrix(OCEAN)
    y_i = train_table.matrix(("I",))[:, 0]
    tree = fit_cart(O, y_i, REGRESSION, max_depth=args.tree_depth, feature_names=OCEAN)
    kwargs = {"curve": curve, "tree": tree, "tree_feature_names": OCEAN}
    fs, _ = cached_features(root, cfg, args.invert_n, _cache_dir(args))
    if cfg.modality != "annotations":
        tr = ~fs.is_test
        kwargs["correlations"] = correlation_matrix(fs.X[tr], fs.labels[tr], args.alpha,
                                                    feature_names=fs.feature_names, trait_names=TRAITS)
    if cfg.modality == "text":
        models = {}
        for t in TRAITS:
            y = (fs.labels[~fs.is_test, TRAITS.index(t)] >= 0.5).astype(float)
            try:
                models[t] = fit_nb((fs.X[~fs.is_test] > 0).astype(float), y)
            except DegenerateError as exc:
                log.warning("trait %s: %s", t, exc)
        kwargs["iw_rows"] = top_informative_stems(models, fs.vocab, k=10)
    files = emit_report_bundle(out, summary={"config": cfg.to_dict()}, **kwargs)
    atomic_write_text(out / "tree.txt", export_tree(tree, "text", OCEAN))
    print("wrote " + ", ".join(sorted(p.name for p in files) + ["tree.txt"]))
    return {"files": [str(p) for p in files]}


def cmd_synth(args) -> dict:
    overrides = {"seed": args.seed if args.seed is not None else 0}
    if args.n is not None:
        overrides["n_samples"] = args.n
    if args.seconds is not None:
        overrides["audio_seconds"] = args.seconds
        overrides["visual_seconds"] = args.seconds
    try:
        spec = preset(args.preset, **overrides)
    except ValueError as exc:
        raise UsageError(f"--preset: {exc}") from None
    out = _out(args)
    data = generate_synthetic(spec, out, audio=not args.no_audio, visual=not args.no_visual)
    print(f"wrote {len(data.ids)} synthetic videos to {out}")
    return {"n": len(data.ids)}


def cmd_report(args) -> dict:
    """Collect every summary/eval JSON under --out into report.json and report.csv."""
    out = _out(args)
    if not out.is_dir():
        raise FileNotFoundError(f"--out {out}: no such directory")
    entries = []
    for p in sorted(out.rglob("*.json")):
        if p.name not in ("summary.json", "eval.json") or "cache" in p.parts:
            continue
        try:
            doc = json.loads(p.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{p}: invalid JSON ({exc})") from None
        rel = p.relative_to(out).as_posix()
        reports = [doc["report"]] if "report" in doc else []
        reports += [doc[k] for k in ("direct", "two_stage") if k in doc]
        for r in reports:
            entries.append({"source": rel, "trait": r["trait"], "mode": r["mode"], "acc": r["acc"],
                            "mae": r["mae"], "r2": r.get("r2"), "model": r["model"]})
    if not entries:
        raise ValidationError(f"no summary.json or eval.json files under {out}; run two-stage or eval first")
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(entries[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(entries)
    atomic_write_text(out / "report.csv", buf.getvalue())
    atomic_write_text(out / "report.json", dumps_json({"entries": entries}))
    for e in entries:
        print(f"{e['source']}: {e['model']} {e['trait']} Acc={e['acc']:.4f}")
    return {"entries": entries}


# -- argument parsing ----------------------------------------------------------

def _common(p, data=True, model=False):
    p.add_argument("--config", help="experiment config (.toml or .json)")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int)
    p.add_argument("--invert-n", action="store_true", help="annotation N column is neuroticism; store 1 - N")
    if data:
        p.add_argument("--data", help="dataset directory (annotations plus modality files)")
        p.add_argument("--cache", help="feature cache directory (default: <out>/cache)")
        p.add_argument("--no-cache", action="store_true")
    if model:
        p.add_argument("--modality", choices=MODALITIES)
        p.add_argument("--trait", choices=TRAITS)
        p.add_argument("--mode", choices=("reg", "clf"))
        p.add_argument("--two-stage-protocol", choices=("oof", "gt"))
        p.add_argument("--model", help="model family for direct / stage-1 fits")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hirability", description="Hirability and personality trait prediction.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("ingest", help="validate a dataset directory")
    _common(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("features", help="extract and cache one modality as CSV")
    p.add_argument("feature_modality", choices=MODALITIES, metavar="modality")
    _common(p)
    p.add_argument("--window", type=int, help="audio aggregation window in seconds (2-15)")
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("train", help="fit a direct model and save it")
    _common(p, model=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score a saved model on the test split")
    _common(p)
    p.add_argument("--model-path", dest="model_path", help=f"model artifact (default: <out>/{MODEL_FILE})")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("two-stage", help="compare direct and two-stage prediction")
    _common(p, model=True)
    p.add_argument("--oracle", action="store_true", help="feed annotated OCEAN to stage 2")
    p.set_defaults(func=cmd_two_stage)

    p = sub.add_parser("sweep", help="audio window-length sweep")
    _common(p, model=True)
    p.add_argument("--min-window", type=int, default=2)
    p.add_argument("--max-window", type=int, default=15)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("explain", help="correlations, informative stems, tree and subset curve")
    _common(p, model=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--tree-depth", type=int, default=3)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("synth", help="write a synthetic dataset")
    _common(p, data=False)
    p.add_argument("--n", type=int, help="number of videos")
    p.add_argument("--preset", default="default", help=f"one of {sorted(PRESETS)}")
    p.add_argument("--seconds", type=int, help="audio/visual clip length")
    p.add_argument("--no-audio", action="store_true")
    p.add_argument("--no-visual", action="store_true")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("report", help="collect run results under --out")
    p.add_argument("--out", help="directory holding earlier runs")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    logging.basicConfig(format="%(levelname)s %(name)s: %(message)s")
    log.setLevel(logging.INFO if args.verbose else logging.WARNING)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            args.func(args)
    except (ValidationError, FormatError, ArtifactError, SingularDesignError,
            TooShortError, DegenerateError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
