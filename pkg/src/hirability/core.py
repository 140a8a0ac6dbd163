"""Domain types, dataset sampling rules and evaluation metrics."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

TRAITS = ("I", "O", "C", "E", "A", "ES")
OCEAN = ("O", "C", "E", "A", "ES")

REJECT_MAX = 0.4
SELECT_MIN = 0.6


class ValidationError(ValueError):
    """Input data violates a documented constraint."""


class DegenerateError(ValueError):
    """Input is well-formed but statistically degenerate (constant, single class, ...)."""


class TooShortError(ValueError):
    """Signal or track is shorter than the requested analysis span."""


class HirabilityClass(enum.Enum):
    SELECT = "S"
    REJECT = "R"

    @property
    def code(self) -> int:
        return 1 if self is HirabilityClass.SELECT else 0


class Split(enum.Enum):
    TRAIN = "train"
    TEST = "test"


class Mode(enum.Enum):
    REGRESSION = "reg"
    CLASSIFICATION = "clf"


@dataclass(frozen=True)
class TraitVector:
    i: float
    o: float
    c: float
    e: float
    a: float
    es: float

    def __post_init__(self):
        for name in ("i", "o", "c", "e", "a", "es"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float, np.floating)) and math.isfinite(v) and 0.0 <= v <= 1.0):
                raise ValidationError(f"trait {name.upper()} = {v!r} outside [0,1]")

    def get(self, trait: str) -> float:
        return getattr(self, trait.lower())

    def ocean(self) -> np.ndarray:
        return np.array([self.o, self.c, self.e, self.a, self.es])

    def as_array(self) -> np.ndarray:
        return np.array([self.i, self.o, self.c, self.e, self.a, self.es])

    @classmethod
    def from_sequence(cls, values: Sequence[float]) -> "TraitVector":
        return cls(*(float(v) for v in values))


@dataclass(frozen=True)
class VideoSample:
    id: str
    split: Split
    labels: TraitVector
    hclass: Optional[HirabilityClass] = None
    transcript_ref: Optional[str] = None
    audio_ref: Optional[str] = None
    visual_ref: Optional[str] = None


@dataclass(frozen=True)
class EvaluationReport:
    trait: str
    mode: Mode
    mae: float
    n_test: int
    model_descriptor: str
    seed: int
    r2: Optional[float] = None
    extra: dict = field(default_factory=dict, compare=False)

    @property
    def acc(self) -> float:
        return 1.0 - self.mae

    def to_dict(self) -> dict:
        d = {
            "trait": self.trait,
            "mode": self.mode.value,
            "acc": self.acc,
            "mae": self.mae,
            "r2": self.r2,
            "n_test": self.n_test,
            "model": self.model_descriptor,
            "seed": self.seed,
        }
        d.update(self.extra)
        return d


def hirability_class(i_score: float) -> Optional[HirabilityClass]:
    if i_score <= REJECT_MAX:
        return HirabilityClass.REJECT
    if i_score >= SELECT_MIN:
        return HirabilityClass.SELECT
    return None


def sample_dataset(samples: Iterable[VideoSample]) -> list[VideoSample]:
    """Drop the 0.4 < I < 0.6 gray area and attach Select/Reject classes.

    Boundary values are kept: I <= 0.4 is Reject, I >= 0.6 is Select.
    """
    out = []
    for s in samples:
        lab = s.labels
        if lab is None:
            raise ValidationError(f"sample {s.id!r} has no labels")
        try:
            # revalidate: labels may have been built with object.__setattr__
            TraitVector(*lab.as_array().tolist())
        except ValidationError as exc:
            raise ValidationError(f"sample {s.id!r}: {exc}") from None
        cls = hirability_class(lab.i)
        if cls is None:
            continue
        out.append(replace(s, hclass=cls))
    return out


def _paired(predictions, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(predictions, dtype=float).ravel()
    t = np.asarray(truth, dtype=float).ravel()
    if p.size == 0 or t.size == 0:
        raise ValueError("empty input")
    if p.size != t.size:
        raise ValueError(f"length mismatch: {p.size} predictions vs {t.size} targets")
    return p, t


def mae(predictions, truth) -> float:
    p, t = _paired(predictions, truth)
    return float(np.mean(np.abs(p - t)))


def acc_metric(predictions, truth) -> float:
    """``1 - MAE``; on {0,1} encodings this is classification accuracy."""
    return 1.0 - mae(predictions, truth)


def r_squared(predictions, truth) -> float:
    p, t = _paired(predictions, truth)
    ss_tot = float(np.sum((t - t.mean()) ** 2))
    if ss_tot == 0.0:
        raise DegenerateError("truth is constant; R^2 undefined")
    ss_res = float(np.sum((t - p) ** 2))
    return 1.0 - ss_res / ss_tot


@dataclass(frozen=True)
class DescriptiveStats:
    iqr: float
    mean: float
    sd: float
    frac_within_1sd: float


def descriptive_stats(scores) -> DescriptiveStats:
    x = np.asarray(scores, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("empty input")
    q25, q75 = np.percentile(x, [25, 75], method="linear")
    mean = float(x.mean())
    sd = float(x.std())
    # tolerance absorbs rounding when every point sits exactly one sd away
    within = np.abs(x - mean) <= sd * (1 + 1e-12) + 1e-15
    return DescriptiveStats(float(q75 - q25), mean, sd, float(within.mean()))


def binarize_trait(score: float, threshold: float = 0.5) -> int:
    if not (math.isfinite(score) and 0.0 <= score <= 1.0):
        raise ValidationError(f"score {score!r} outside [0,1]")
    return int(score >= threshold)
