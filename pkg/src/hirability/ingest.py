"""Loaders for annotations, transcripts, audio and visual tracks; model persistence."""

from __future__ import annotations

import csv
import hashlib
import io
import json
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .core import TRAITS, Split, TraitVector, ValidationError

SCHEMA_VERSION = 1
ANALYSIS_RATE = 16000
N_LANDMARKS = 68


class FormatError(ValueError):
    """A file is not in the expected format (bad header, encoding, truncation)."""


class ArtifactError(ValueError):
    """A model artifact is corrupt, tampered with or of an unsupported version."""


# -- annotations -------------------------------------------------------------

@dataclass(frozen=True)
class AnnotationTable:
    rows: dict[str, TraitVector]
    split: dict[str, Split]

    def __len__(self):
        return len(self.rows)

    def ids(self) -> list[str]:
        return list(self.rows)

    def matrix(self, traits=TRAITS) -> np.ndarray:
        return np.array([[tv.get(t) for t in traits] for tv in self.rows.values()])

    def merged(self, other: "AnnotationTable") -> "AnnotationTable":
        dup = set(self.rows) & set(other.rows)
        if dup:
            raise ValidationError(f"duplicate video ids across tables: {sorted(dup)[:5]}")
        return AnnotationTable({**self.rows, **other.rows}, {**self.split, **other.split})


def _parse_split(tag) -> Split:
    if isinstance(tag, Split):
        return tag
    try:
        return Split(str(tag).lower())
    except ValueError:
        raise ValueError(f"split tag must be 'train' or 'test', got {tag!r}") from None


def read_annotations(text: str, split_tag, source: str = "<string>",
                     invert_n: bool = False) -> AnnotationTable:
    split = _parse_split(tag=split_tag)
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise FormatError(f"{source}: empty file") from None
    cols = {h.upper(): j for j, h in enumerate(header)}
    id_col = next((j for h, j in cols.items() if h.lower() == "video_id"), None)
    es_name = "ES" if "ES" in cols else ("N" if "N" in cols else None)
    missing = [t for t in ("I", "O", "C", "E", "A") if t not in cols]
    if id_col is None:
        missing.insert(0, "video_id")
    if es_name is None:
        missing.append("ES")
    if missing:
        raise FormatError(f"{source}: header lacks columns {missing}")
    order = [cols[t] for t in ("I", "O", "C", "E", "A")] + [cols[es_name]]
    rows, splits = {}, {}
    for lineno, rec in enumerate(reader, start=2):
        if not rec or all(not c.strip() for c in rec):
            continue
        if len(rec) != len(header):
            raise FormatError(f"{source}: row {lineno} has {len(rec)} fields, header has {len(header)}")
        vid = rec[id_col].strip()
        if not vid:
            raise ValidationError(f"{source}: row {lineno} has an empty video_id")
        if vid in rows:
            raise ValidationError(f"{source}: row {lineno} duplicates video id {vid!r}")
        vals = []
        for name, j in zip(TRAITS, order):
            cell = rec[j].strip()
            if not cell:
                raise ValidationError(f"{source}: row {lineno} ({vid}) is missing {name}")
            try:
                vals.append(float(cell))
            except ValueError:
                raise FormatError(f"{source}: row {lineno} ({vid}) has malformed {name} {cell!r}") from None
        if invert_n:
            vals[5] = 1.0 - vals[5]
        try:
            rows[vid] = TraitVector(*vals)
        except ValidationError as exc:
            raise ValidationError(f"{source}: row {lineno} ({vid}): {exc}") from None
        splits[vid] = split
    return AnnotationTable(rows, splits)


def load_annotations(path, split_tag, invert_n: bool = False) -> AnnotationTable:
    """Header-driven CSV: video_id,I,O,C,E,A,ES in any order.

    A column named N is read as already-inverted ES unless ``invert_n``.
    """
    path = Path(path)
    try:
        text = path.read_text("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not UTF-8 ({exc})") from None
    return read_annotations(text, split_tag, str(path), invert_n)


def write_annotations(table: AnnotationTable, path, split: Split | None = None) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["video_id", *TRAITS])
    for vid, tv in table.rows.items():
        if split is not None and table.split[vid] != split:
            continue
        w.writerow([vid, *(repr(float(v)) for v in tv.as_array())])
    Path(path).write_text(buf.getvalue(), "utf-8")


# -- transcripts -------------------------------------------------------------

def load_transcripts(source, ids=None) -> dict[str, str]:
    """Read ``<id>.txt`` files from a directory or a JSON id -> text map."""
    source = Path(source)
    if source.is_dir():
        files = sorted(source.glob("*.txt"))
        out = {f.stem: f.read_text("utf-8") for f in files if ids is None or f.stem in ids}
    else:
        try:
            data = json.loads(source.read_text("utf-8"))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{source}: invalid JSON ({exc})") from None
        if not isinstance(data, dict) or not all(isinstance(v, str) for v in data.values()):
            raise FormatError(f"{source}: expected an object mapping id to text")
        out = {k: v for k, v in data.items() if ids is None or k in ids}
    return out


# -- audio -------------------------------------------------------------------

@dataclass(frozen=True)
class AudioClip:
    samples: np.ndarray
    sample_rate: int

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def _to_float(data: np.ndarray) -> np.ndarray:
    if data.dtype == np.uint8:
        return (data.astype(float) - 128.0) / 128.0
    if data.dtype == np.int16:
        return data.astype(float) / 32768.0
    if data.dtype == np.int32:
        # 24-bit data arrives left-justified in int32
        return data.astype(float) / 2147483648.0
    if data.dtype == np.float32:
        return data.astype(float)
    raise FormatError(f"unsupported sample type {data.dtype}")


def resample(x: np.ndarray, rate_in: int, rate_out: int) -> np.ndarray:
    """Polyphase windowed-sinc (Kaiser) resampling."""
    from scipy.signal import resample_poly

    if rate_in == rate_out:
        return x
    frac = Fraction(rate_out, rate_in)
    return resample_poly(x, frac.numerator, frac.denominator)


def load_wav(path, rate: int = ANALYSIS_RATE) -> AudioClip:
    from scipy.io import wavfile

    path = Path(path)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", wavfile.WavFileWarning)
            sr, data = wavfile.read(path)
    except (ValueError, wavfile.WavFileWarning, EOFError) as exc:
        raise FormatError(f"{path}: unreadable WAV ({exc})") from None
    if data.ndim == 2:
        if data.shape[1] > 2:
            raise FormatError(f"{path}: {data.shape[1]} channels, expected 1 or 2")
        x = _to_float(data).mean(axis=1)
    else:
        x = _to_float(data)
    if rate is not None:
        x = resample(x, int(sr), rate)
        sr = rate
    return AudioClip(np.ascontiguousarray(x, dtype=float), int(sr))


def write_wav(path, clip: AudioClip) -> None:
    from scipy.io import wavfile

    pcm = np.clip(np.round(clip.samples * 32768.0), -32768, 32767).astype(np.int16)
    wavfile.write(path, clip.sample_rate, pcm)


# -- visual tracks -----------------------------------------------------------

VISUAL_COLUMNS = (
    ["t"] + [f"x{i}" for i in range(N_LANDMARKS)] + [f"y{i}" for i in range(N_LANDMARKS)]
    + ["gaze_x", "gaze_y", "gaze_z", "pan", "tilt", "eye_contact"]
)


@dataclass(frozen=True)
class VisualTrack:
    t: np.ndarray  # (n,)
    landmarks: np.ndarray  # (n, 68, 2) pixels
    gaze: np.ndarray  # (n, 3) unit vectors
    pan: np.ndarray  # radians
    tilt: np.ndarray
    eye_contact: np.ndarray  # bool

    def __len__(self):
        return self.t.size

    def shifted(self, dt: float) -> "VisualTrack":
        return VisualTrack(self.t + dt, self.landmarks, self.gaze, self.pan, self.tilt, self.eye_contact)


def make_track(t, landmarks, gaze, pan, tilt, eye_contact, source="<track>") -> VisualTrack:
    t = np.asarray(t, dtype=float)
    lm = np.asarray(landmarks, dtype=float).reshape(t.size, N_LANDMARKS, 2)
    gaze = np.asarray(gaze, dtype=float).reshape(t.size, 3)
    if t.size > 1 and not np.all(np.diff(t) > 0):
        k = int(np.flatnonzero(np.diff(t) <= 0)[0]) + 1
        raise ValidationError(f"{source}: timestamps not strictly increasing at frame {k}")
    if not np.all(np.isfinite(lm)):
        k = int(np.flatnonzero(~np.isfinite(lm).all(axis=(1, 2)))[0])
        raise ValidationError(f"{source}: frame {k} has a missing landmark")
    norms = np.linalg.norm(gaze, axis=1)
    bad = np.abs(norms - 1.0) > 1e-3
    if bad.any():
        k = int(np.flatnonzero(bad)[0])
        raise ValidationError(f"{source}: frame {k} gaze norm {norms[k]:.6g} is not unit length")
    gaze = gaze / norms[:, None]
    return VisualTrack(t, lm, gaze, np.asarray(pan, dtype=float), np.asarray(tilt, dtype=float),
                       np.asarray(eye_contact).astype(bool))


def load_visual_track(path) -> VisualTrack:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise FormatError(f"{path}: empty file") from None
        if len(header) != len(VISUAL_COLUMNS):
            raise FormatError(f"{path}: {len(header)} columns, expected {len(VISUAL_COLUMNS)}")
        if set(header) != set(VISUAL_COLUMNS):
            missing = sorted(set(VISUAL_COLUMNS) - set(header))
            raise FormatError(f"{path}: header missing {missing[:5]}")
        pos = [header.index(c) for c in VISUAL_COLUMNS]
        rows = []
        for lineno, rec in enumerate(reader, start=2):
            if not rec:
                continue
            if len(rec) != len(header):
                raise FormatError(f"{path}: row {lineno} has {len(rec)} fields, expected {len(header)}")
            try:
                rows.append([float(rec[j]) if rec[j].strip() else np.nan for j in pos])
            except ValueError:
                raise FormatError(f"{path}: row {lineno} has a malformed number") from None
    a = np.asarray(rows, dtype=float).reshape(-1, len(VISUAL_COLUMNS))
    ec = a[:, -1]
    if not np.all(np.isin(ec, (0.0, 1.0))):
        raise FormatError(f"{path}: eye_contact must be 0 or 1")
    lm = np.stack([a[:, 1:1 + N_LANDMARKS], a[:, 1 + N_LANDMARKS:1 + 2 * N_LANDMARKS]], axis=-1)
    g = 1 + 2 * N_LANDMARKS
    return make_track(a[:, 0], lm, a[:, g:g + 3], a[:, g + 3], a[:, g + 4], ec.astype(bool), str(path))


def write_visual_track(path, track: VisualTrack) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(VISUAL_COLUMNS)
    for k in range(len(track)):
        w.writerow([repr(float(track.t[k]))]
                   + [repr(float(v)) for v in track.landmarks[k, :, 0]]
                   + [repr(float(v)) for v in track.landmarks[k, :, 1]]
                   + [repr(float(v)) for v in track.gaze[k]]
                   + [repr(float(track.pan[k])), repr(float(track.tilt[k])), int(track.eye_contact[k])])
    Path(path).write_text(buf.getvalue(), "utf-8")


# -- model artifacts ---------------------------------------------------------

@dataclass
class ModelArtifact:
    model: Any
    target: str
    hyperparameters: dict = field(default_factory=dict)
    input_schema: list[str] = field(default_factory=list)
    training_fingerprint: str = ""
    clip_output: bool = False

    @property
    def family(self) -> str:
        return self.model.family

    def predict(self, X) -> np.ndarray:
        y = self.model.predict(X)
        return np.clip(y, 0.0, 1.0) if self.clip_output else y

    def to_document(self) -> dict:
        params = self.model.to_payload()
        return {
            "schema_version": SCHEMA_VERSION,
            "family": self.family,
            "target": self.target,
            "hyperparameters": self.hyperparameters,
            "input_schema": list(self.input_schema),
            "training_fingerprint": self.training_fingerprint,
            "clip_output": self.clip_output,
            "parameters": params,
            "checksum": _checksum(self.family, params),
        }

    @classmethod
    def from_document(cls, doc: dict, source: str = "<document>") -> "ModelArtifact":
        from .models import MODEL_CLASSES

        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ArtifactError(f"{source}: unsupported schema_version {version!r} (expected {SCHEMA_VERSION})")
        family = doc.get("family")
        if family not in MODEL_CLASSES:
            raise ArtifactError(f"{source}: unknown model family {family!r}")
        params = doc.get("parameters")
        if doc.get("checksum") != _checksum(family, params):
            raise ArtifactError(f"{source}: checksum mismatch; family or parameters were altered")
        try:
            model = MODEL_CLASSES[family].from_payload(params)
        except (KeyError, TypeError, ValueError) as exc:
            raise ArtifactError(f"{source}: parameters do not match family {family!r} ({exc})") from None
        return cls(model, doc["target"], dict(doc.get("hyperparameters", {})),
                   list(doc.get("input_schema", [])), doc.get("training_fingerprint", ""),
                   bool(doc.get("clip_output", False)))


def _checksum(family, params) -> str:
    blob = json.dumps([family, params], sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def atomic_write_text(path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_model(artifact: ModelArtifact, path) -> Path:
    atomic_write_text(path, json.dumps(artifact.to_document(), indent=1, sort_keys=True))
    return Path(path)


def load_model(path) -> ModelArtifact:
    path = Path(path)
    try:
        doc = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"{path}: not a JSON model document ({exc})") from None
    return ModelArtifact.from_document(doc, str(path))


def fingerprint(*arrays) -> str:
    h = hashlib.sha256()
    for a in arrays:
        a = np.ascontiguousarray(a)
        h.update(str(a.dtype).encode())
        h.update(str(a.shape).encode())
        h.update(a.tobytes())
    return h.hexdigest()[:16]
