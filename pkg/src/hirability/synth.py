"""Synthetic candidate-screening data with a known OCEAN -> hirability structure.

Latent OCEAN scores drive every emitted modality; the interview score I is a
linear function of OCEAN plus noise, redrawn until it leaves the 0.4-0.6 band.
"""

from __future__ import annotations

import io
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .core import OCEAN, REJECT_MAX, SELECT_MIN, Split, TraitVector
from .ingest import (
    ANALYSIS_RATE, N_LANDMARKS, AnnotationTable, AudioClip, VisualTrack, write_annotations,
    write_visual_track, write_wav,
)

# word pools; the latent trait moves each pool's usage rate
NEUTRAL_WORDS = (
    "i am really happy to be here today and i want to tell you about my experience "
    "in the company where i work with a team of people on projects every day "
    "my job involves planning meetings clients reports design products sales "
    "customers school university study travel music family friends city weekend"
).split()
TRAIT_POOLS = {
    # (trait, sign): words; +1 raises usage with the trait, -1 lowers it
    ("C", -1): ["fuck", "fucking", "damn", "shit", "crap"],
    ("C", 1): ["healthy", "diet", "organized", "plan", "schedule", "responsible"],
    ("E", 1): ["hobbies", "fashion", "party", "friends", "discuss", "talking"],
    ("E", -1): ["quiet", "alone", "address", "reading"],
    ("A", 1): ["mention", "discuss", "helping", "kind", "thanks", "monitor"],
    ("A", -1): ["maintain", "annoying", "hate", "stupid"],
    ("O", 1): ["young", "limits", "creative", "imagine", "art", "explore"],
    ("O", -1): ["perfectly", "knowledgeable", "routine", "traditional"],
    ("ES", 1): ["lucky", "calm", "relaxed", "achieve", "confident"],
    ("ES", -1): ["dead", "worried", "nervous", "stress", "afraid"],
}


@dataclass(frozen=True)
class SyntheticSpec:
    n_samples: int = 200
    seed: int = 0
    ocean_mean: float = 0.5
    ocean_sd: float = 0.15
    hirability_weights: tuple[float, ...] = (0.3, 0.7, 0.6, 0.5, 0.9)  # O, C, E, A, ES
    hirability_noise_sd: float = 0.05
    test_fraction: float = 0.2
    vector_dim: int = 100
    vector_noise_sd: float = 1.0
    words_per_doc: int = 120
    pool_rate: float = 0.12
    audio_seconds: float = 15.0
    audio_rate: int = ANALYSIS_RATE
    audio_noise_sd: float = 0.3
    visual_fps: float = 10.0
    visual_seconds: float = 15.0
    visual_noise_sd: float = 0.3


PRESETS = {
    "default": SyntheticSpec(),
    "zero-noise": SyntheticSpec(hirability_noise_sd=0.0, vector_noise_sd=0.0, audio_noise_sd=0.0,
                                visual_noise_sd=0.0),
    # noisy I labels and a half-sized training split
    "high-noise": SyntheticSpec(n_samples=2000, hirability_noise_sd=0.30, vector_dim=100,
                                vector_noise_sd=4.0, test_fraction=0.5),
}


def preset(name: str, **overrides) -> SyntheticSpec:
    try:
        base = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    return replace(base, **overrides)


@dataclass
class SyntheticData:
    spec: SyntheticSpec
    ids: list[str]
    split: np.ndarray  # Split per row
    labels: np.ndarray  # (n, 6) in TRAITS order
    latent: np.ndarray  # (n, 5) standardized OCEAN
    vectors: np.ndarray  # (n, vector_dim)
    transcripts: list[str] = field(default_factory=list)

    def annotation_table(self) -> AnnotationTable:
        rows = {vid: TraitVector.from_sequence(lab) for vid, lab in zip(self.ids, self.labels)}
        return AnnotationTable(rows, dict(zip(self.ids, self.split)))


def _streams(seed: int):
    ss = np.random.SeedSequence(seed)
    names = ("ocean", "hire", "split", "vector_map", "vector_noise", "text", "audio", "visual")
    return dict(zip(names, (np.random.default_rng(s) for s in ss.spawn(len(names)))))


def hirability_function(spec: SyntheticSpec, ocean: np.ndarray) -> np.ndarray:
    """Noise-free I as a linear function of OCEAN."""
    w = np.asarray(spec.hirability_weights, dtype=float)
    return 0.5 + (np.asarray(ocean, dtype=float) - spec.ocean_mean) @ w


def _draw_labels(spec: SyntheticSpec, rng_ocean, rng_hire, n: int):
    ocean = np.empty((n, 5))
    hire = np.empty(n)
    for k in range(n):
        # redraw the whole candidate until I lies in [0,1] outside the gray band
        while True:
            o = np.clip(rng_ocean.normal(spec.ocean_mean, spec.ocean_sd, 5), 0.0, 1.0)
            i = float(hirability_function(spec, o))
            if spec.hirability_noise_sd > 0:
                i += rng_hire.normal(0.0, spec.hirability_noise_sd)
            if 0.0 <= i <= 1.0 and (i <= REJECT_MAX or i >= SELECT_MIN):
                break
        ocean[k], hire[k] = o, i
    return ocean, hire


def _transcript(rng, z: np.ndarray, spec: SyntheticSpec) -> str:
    words = list(rng.choice(NEUTRAL_WORDS, size=spec.words_per_doc))
    for (trait, sign), pool in TRAIT_POOLS.items():
        zt = z[OCEAN.index(trait)]
        lam = spec.pool_rate * spec.words_per_doc / len(TRAIT_POOLS) * np.exp(1.2 * sign * zt)
        for _ in range(rng.poisson(lam)):
            words.insert(int(rng.integers(0, len(words) + 1)), str(rng.choice(pool)))
    return " ".join(words) + "\n"


def generate(spec: SyntheticSpec, with_text: bool = True) -> SyntheticData:
    """In-memory draw: labels, latent scores, vector emissions and transcripts."""
    rng = _streams(spec.seed)
    n = spec.n_samples
    ocean, hire = _draw_labels(spec, rng["ocean"], rng["hire"], n)
    labels = np.column_stack([hire, ocean])
    z = (ocean - spec.ocean_mean) / spec.ocean_sd
    n_test = int(round(spec.test_fraction * n))
    is_test = np.zeros(n, dtype=bool)
    is_test[rng["split"].permutation(n)[:n_test]] = True
    split = np.array([Split.TEST if t else Split.TRAIN for t in is_test], dtype=object)
    A = rng["vector_map"].normal(0.0, 1.0, (5, spec.vector_dim))
    vectors = z @ A
    if spec.vector_noise_sd > 0:
        vectors = vectors + rng["vector_noise"].normal(0.0, spec.vector_noise_sd, vectors.shape)
    transcripts = [_transcript(rng["text"], z[k], spec) for k in range(n)] if with_text else []
    ids = [f"v{k:05d}" for k in range(n)]
    return SyntheticData(spec, ids, split, labels, z, vectors, transcripts)


# -- audio and visual emissions ---------------------------------------------

def synth_audio(z: np.ndarray, spec: SyntheticSpec, rng: np.random.Generator) -> AudioClip:
    """Stationary voiced tone plus clicks and noise, parameterized by OCEAN."""
    sr = spec.audio_rate
    n = int(round(spec.audio_seconds * sr))
    t = np.arange(n) / sr
    jitter = rng.normal(0.0, spec.audio_noise_sd, 5) if spec.audio_noise_sd > 0 else np.zeros(5)
    e, es, o, a, c = (z[OCEAN.index(k)] + jitter[j] for j, k in enumerate(("E", "ES", "O", "A", "C")))
    f0 = 140.0 * 2.0 ** (0.25 * e)
    n_harm = int(np.clip(round(6 + 2 * o), 2, 12))
    voice = sum(np.sin(2 * np.pi * f0 * h * t) / h for h in range(1, n_harm + 1))
    voice *= 0.25 / max(np.max(np.abs(voice)), 1e-9) * (1.0 + 0.3 * np.tanh(e))
    bpm = 90.0 + 25.0 * np.tanh(a)
    clicks = np.zeros(n)
    period = int(round(60.0 / bpm * sr))
    # 20 ms decaying 2 kHz burst, loud enough to stand out of the hiss
    tb = np.arange(int(0.02 * sr)) / sr
    burst = 0.5 * np.exp(-tb / 0.005) * np.sin(2 * np.pi * 2000.0 * tb)
    for start in range(0, n, period):
        seg = burst[:n - start]
        clicks[start:start + seg.size] = seg
    hiss = rng.normal(0.0, 0.02 * (1.0 + np.exp(-es)), n)
    buzz = 0.05 * (1.0 + np.tanh(c)) * np.sign(np.sin(2 * np.pi * 3 * f0 * t))
    x = np.clip(voice + clicks + hiss + buzz, -1.0, 1.0)
    return AudioClip(x, sr)


def synth_track(z: np.ndarray, spec: SyntheticSpec, rng: np.random.Generator) -> VisualTrack:
    n = int(round(spec.visual_seconds * spec.visual_fps))
    t = np.arange(n) / spec.visual_fps
    jitter = rng.normal(0.0, spec.visual_noise_sd, 5) if spec.visual_noise_sd > 0 else np.zeros(5)
    o, c, e, a, es = z + jitter
    base = np.column_stack([
        320 + 60 * np.cos(np.linspace(0, 2 * np.pi, N_LANDMARKS, endpoint=False)),
        240 + 80 * np.sin(np.linspace(0, 2 * np.pi, N_LANDMARKS, endpoint=False)),
    ])
    speed = 1.5 * np.exp(0.3 * (o + e + es) / 3)  # px/frame
    steps = rng.normal(0.0, speed, (n, 1, 2))
    lm = base[None] + np.cumsum(steps, axis=0) * 0.2 + rng.normal(0.0, 0.3, (n, N_LANDMARKS, 2))
    gaze_jit = 0.05 * np.exp(-0.4 * c)
    g = np.column_stack([rng.normal(0, gaze_jit, n), rng.normal(0, gaze_jit, n), -np.ones(n)])
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    pan = np.cumsum(rng.normal(0, 0.01 * np.exp(0.3 * e), n))
    tilt = np.cumsum(rng.normal(0, 0.01 * np.exp(0.3 * (o + c + e + a + es) / 5), n))
    p_contact = 1.0 / (1.0 + np.exp(-(0.5 + 0.8 * c)))
    contact = rng.random(n) < p_contact
    return VisualTrack(t, lm, g, pan, tilt, contact)


def write_dataset(data: SyntheticData, out_dir, audio: bool = True, visual: bool = True) -> Path:
    """Write annotations, transcripts, WAVs, visual tracks and a manifest."""
    out = Path(out_dir)
    for sub in ("transcripts", "audio", "visual"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    table = data.annotation_table()
    write_annotations(table, out / "train.csv", Split.TRAIN)
    write_annotations(table, out / "test.csv", Split.TEST)
    if data.transcripts:
        for vid, text in zip(data.ids, data.transcripts):
            (out / "transcripts" / f"{vid}.txt").write_text(text, "utf-8")
    rng = _streams(data.spec.seed)
    for k, vid in enumerate(data.ids):
        if audio:
            write_wav(out / "audio" / f"{vid}.wav", synth_audio(data.latent[k], data.spec, rng["audio"]))
        if visual:
            write_visual_track(out / "visual" / f"{vid}.csv", synth_track(data.latent[k], data.spec, rng["visual"]))
    buf = io.StringIO()
    np.savetxt(buf, data.vectors, fmt="%.17g", delimiter=",")
    (out / "vectors.csv").write_text(
        "video_id," + ",".join(f"v{j}" for j in range(data.vectors.shape[1])) + "\n"
        + "".join(f"{vid},{line}\n" for vid, line in zip(data.ids, buf.getvalue().splitlines())),
        "utf-8",
    )
    manifest = {
        "annotations": {"train": "train.csv", "test": "test.csv"},
        "transcripts": "transcripts" if data.transcripts else None,
        "audio": "audio" if audio else None,
        "visual": "visual" if visual else None,
        "vectors": "vectors.csv",
        "generator": {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(data.spec).items()},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n", "utf-8")
    return out


def generate_synthetic(spec: SyntheticSpec, out_dir, audio: bool = True, visual: bool = True) -> SyntheticData:
    data = generate(spec)
    write_dataset(data, out_dir, audio, visual)
    return data
