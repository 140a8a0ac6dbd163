"""Frame-level audio descriptors, 1 s thin slices and window statistics.

Conventions: 25 ms Hann frames with a 10 ms hop, FFT size the next power of
two, 26 triangular mel filters spanning 0 Hz to Nyquist, log floor 1e-10,
orthonormal DCT-II.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from .core import TooShortError
from .ingest import AudioClip

FRAME_S = 0.025
HOP_S = 0.010
N_MELS = 26
N_MFCC = 20
LOG_FLOOR = 1e-10
ROLLOFF = 0.90
CONTRAST_ALPHA = 0.2
CONTRAST_FMIN = 200.0
CONTRAST_BANDS = 6
TEMPO_MIN_BPM = 30.0
TEMPO_MAX_BPM = 300.0
TEMPO_CONTEXT_S = 4.0
TEMPO_TIE_RTOL = 0.10
TEMPO_SMOOTH_FRAMES = 5

SCALAR_STREAMS = ("energy", "zcr", "flatness", "bandwidth", "rolloff", "contrast", "tonnetz_norm")
SLICE_STREAMS = tuple(f"mfcc{i:02d}" for i in range(1, N_MFCC + 1)) + SCALAR_STREAMS + ("tempo",)


def _feature_names() -> tuple[str, ...]:
    names = [f"mfcc{i:02d}_mu" for i in range(1, N_MFCC + 1)]
    names += [f"mfcc{i:02d}_sigma" for i in range(1, N_MFCC + 1)]
    for s in SCALAR_STREAMS + ("tempo",):
        names += [f"{s}_mu", f"{s}_sigma"]
    return tuple(names)


FEATURE_NAMES = _feature_names()
assert len(FEATURE_NAMES) == 56


@dataclass(frozen=True)
class Spectra:
    frames: np.ndarray  # (n_frames, frame_len) raw samples, unwindowed
    complex: np.ndarray  # (n_frames, n_fft // 2 + 1)
    sample_rate: int
    n_fft: int
    hop: int

    @property
    def magnitude(self) -> np.ndarray:
        return np.abs(self.complex)

    @property
    def power(self) -> np.ndarray:
        return np.abs(self.complex) ** 2

    @property
    def freqs(self) -> np.ndarray:
        return np.arange(self.n_fft // 2 + 1) * self.sample_rate / self.n_fft

    @property
    def frame_len(self) -> int:
        return self.frames.shape[1]


def hann(n: int) -> np.ndarray:
    """Periodic Hann window (overlap-adds to a constant at hop n/2)."""
    return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(n) / n)


def frame_signal(x: np.ndarray, frame_len: int, hop: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.size < frame_len:
        raise TooShortError(f"signal of {x.size} samples is shorter than one frame ({frame_len})")
    n = 1 + (x.size - frame_len) // hop
    idx = np.arange(frame_len)[None, :] + hop * np.arange(n)[:, None]
    return x[idx]


def _samples_and_rate(clip, sample_rate):
    if isinstance(clip, AudioClip):
        return clip.samples, clip.sample_rate
    if sample_rate is None:
        raise ValueError("sample_rate required for raw sample arrays")
    return np.asarray(clip, dtype=float), int(sample_rate)


def stft(clip, sample_rate: int | None = None, frame_s: float = FRAME_S,
         hop_s: float = HOP_S, n_fft: int | None = None) -> Spectra:
    x, sr = _samples_and_rate(clip, sample_rate)
    frame_len = int(round(frame_s * sr))
    hop = int(round(hop_s * sr))
    if hop > frame_len:
        raise ValueError("hop longer than frame")
    if n_fft is None:
        n_fft = 1 << (frame_len - 1).bit_length()
    frames = frame_signal(x, frame_len, hop)
    spec = np.fft.rfft(frames * hann(frame_len), n=n_fft, axis=1)
    return Spectra(frames, spec, sr, n_fft, hop)


# -- MFCC ------------------------------------------------------------------

def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=float) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=float) / 2595.0) - 1.0)


def mel_filterbank(sample_rate: int, n_fft: int, n_mels: int = N_MELS) -> np.ndarray:
    """(n_mels, n_fft//2+1) triangles with unit peaks, evenly spaced in mel."""
    freqs = np.arange(n_fft // 2 + 1) * sample_rate / n_fft
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2.0), n_mels + 2))
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    rising = (freqs[None, :] - lo) / (mid - lo)
    falling = (hi - freqs[None, :]) / (hi - mid)
    return np.maximum(0.0, np.minimum(rising, falling))


def mfcc(spectra: Spectra, n_mels: int = N_MELS, n_coeffs: int = N_MFCC) -> np.ndarray:
    if n_coeffs > n_mels:
        raise ValueError(f"n_coeffs ({n_coeffs}) > n_mels ({n_mels})")
    fb = mel_filterbank(spectra.sample_rate, spectra.n_fft, n_mels)
    bands = spectra.power @ fb.T
    logb = np.log(np.maximum(bands, LOG_FLOOR))
    return dct(logb, type=2, norm="ortho", axis=1)[:, :n_coeffs]


# -- scalar descriptors ----------------------------------------------------

def frame_energy(frames: np.ndarray) -> np.ndarray:
    return np.sum(frames ** 2, axis=1) / frames.shape[1]


def zero_crossing_rate(frames: np.ndarray) -> np.ndarray:
    # zero counts as positive, so an all-zero frame has no crossings
    neg = np.signbit(frames) & (frames != 0)
    return np.sum(neg[:, 1:] != neg[:, :-1], axis=1) / (frames.shape[1] - 1)


def spectral_flatness(power: np.ndarray) -> np.ndarray:
    """Geometric over arithmetic mean of the power spectrum; 1 for silent frames."""
    p = np.maximum(power, LOG_FLOOR)
    gm = np.exp(np.mean(np.log(p), axis=1))
    am = np.mean(p, axis=1)
    out = gm / am
    out[np.all(power == 0, axis=1)] = 1.0
    return out


def _normalized(mag):
    tot = mag.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(tot > 0, mag / tot, 0.0), tot[:, 0]


def spectral_centroid(mag, freqs):
    w, _ = _normalized(mag)
    return w @ freqs


def spectral_bandwidth(mag: np.ndarray, freqs: np.ndarray, p: float = 2.0) -> np.ndarray:
    w, _ = _normalized(mag)
    centroid = w @ freqs
    dev = np.abs(freqs[None, :] - centroid[:, None]) ** p
    return np.sum(w * dev, axis=1) ** (1.0 / p)


def spectral_rolloff(mag: np.ndarray, freqs: np.ndarray, fraction: float = ROLLOFF) -> np.ndarray:
    """Lowest bin frequency whose cumulative magnitude reaches ``fraction``."""
    cum = np.cumsum(mag, axis=1)
    total = cum[:, -1:]
    reached = cum >= fraction * total
    k = np.argmax(reached, axis=1)
    out = freqs[k]
    out[total[:, 0] == 0] = 0.0
    return out


def contrast_band_edges(sample_rate: int) -> np.ndarray:
    edges = CONTRAST_FMIN * 2.0 ** np.arange(CONTRAST_BANDS + 1)
    edges[-1] = sample_rate / 2.0
    return edges


def spectral_contrast(power: np.ndarray, freqs: np.ndarray, sample_rate: int,
                      alpha: float = CONTRAST_ALPHA) -> np.ndarray:
    """Peak-minus-valley level (dB) per octave band, averaged over the bands."""
    edges = contrast_band_edges(sample_rate)
    per_band = []
    for b in range(CONTRAST_BANDS):
        lo, hi = edges[b], edges[b + 1]
        sel = (freqs >= lo) & ((freqs < hi) if b < CONTRAST_BANDS - 1 else (freqs <= hi))
        band = np.sort(power[:, sel], axis=1)
        q = max(1, int(round(alpha * band.shape[1])))
        valley = np.maximum(band[:, :q].mean(axis=1), LOG_FLOOR)
        peak = np.maximum(band[:, -q:].mean(axis=1), LOG_FLOOR)
        per_band.append(10.0 * (np.log10(peak) - np.log10(valley)))
    return np.mean(per_band, axis=0)


def chroma(power: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    """Fold bins >= 27.5 Hz onto 12 pitch classes (C = 0); L1-normalized."""
    ok = freqs >= 27.5
    pc = (np.round(12.0 * np.log2(freqs[ok] / 440.0)).astype(int) + 9) % 12
    fold = np.zeros((ok.sum(), 12))
    fold[np.arange(ok.sum()), pc] = 1.0
    C = power[:, ok] @ fold
    tot = C.sum(axis=1, keepdims=True)
    return np.where(tot > 0, C / np.where(tot > 0, tot, 1.0), 0.0)


def tonnetz_basis() -> np.ndarray:
    """6x12 tonal-centroid projection: fifths, minor thirds, major thirds."""
    l = np.arange(12)
    r1, r2, r3 = 1.0, 1.0, 0.5
    return np.vstack([
        r1 * np.sin(l * 7 * np.pi / 6), r1 * np.cos(l * 7 * np.pi / 6),
        r2 * np.sin(l * 3 * np.pi / 2), r2 * np.cos(l * 3 * np.pi / 2),
        r3 * np.sin(l * 2 * np.pi / 3), r3 * np.cos(l * 2 * np.pi / 3),
    ])


def tonnetz_norm(power: np.ndarray, freqs: np.ndarray) -> np.ndarray:
    return np.linalg.norm(chroma(power, freqs) @ tonnetz_basis().T, axis=1)


def scalar_descriptors(spectra: Spectra) -> dict[str, np.ndarray]:
    mag, power, freqs = spectra.magnitude, spectra.power, spectra.freqs
    return {
        "energy": frame_energy(spectra.frames),
        "zcr": zero_crossing_rate(spectra.frames),
        "flatness": spectral_flatness(power),
        "bandwidth": spectral_bandwidth(mag, freqs),
        "rolloff": spectral_rolloff(mag, freqs),
        "contrast": spectral_contrast(power, freqs, spectra.sample_rate),
        "tonnetz_norm": tonnetz_norm(power, freqs),
    }


# -- tempo -----------------------------------------------------------------

def onset_envelope(spectra: Spectra) -> np.ndarray:
    """Half-wave-rectified spectral flux of the magnitude spectrum."""
    mag = spectra.magnitude
    if mag.shape[0] < 2:
        return np.zeros(0)
    return np.maximum(np.diff(mag, axis=0), 0.0).sum(axis=1)


def tempo(samples, sample_rate: int) -> float:
    """Dominant beat rate (BPM) from the onset-envelope autocorrelation.

    The envelope is smoothed with a short Hann kernel so beats that fall
    between hops still line up. Searches lags for 30-300 BPM that fit
    inside the signal. Local maxima within TEMPO_TIE_RTOL of the largest
    count as tied and the shortest lag wins, which resolves octave
    ambiguity toward the faster reading; the peak is refined by parabolic
    interpolation. Returns 0.0 when there is no onset energy.
    """
    x = np.asarray(samples, dtype=float)
    try:
        env = onset_envelope(stft(x, sample_rate))
    except TooShortError:
        return 0.0
    fps = 1.0 / HOP_S
    if env.size == 0 or not np.any(env > 0):
        return 0.0
    kernel = np.hanning(TEMPO_SMOOTH_FRAMES + 2)[1:-1]
    env = np.convolve(env, kernel / kernel.sum(), mode="same")
    env = env - env.mean()
    n = env.size
    ac = np.correlate(env, env, mode="full")[n - 1:]
    if ac[0] <= 0:
        return 0.0
    lo = int(np.ceil(60.0 * fps / TEMPO_MAX_BPM))
    hi = min(int(np.floor(60.0 * fps / TEMPO_MIN_BPM)), n - 2)
    if hi < lo:
        return 0.0
    seg = ac[lo:hi + 1]
    # local maxima only, so the edge of the search range cannot win
    inner = np.zeros_like(seg, dtype=bool)
    full = ac[lo - 1:hi + 2]
    inner[:] = (full[1:-1] >= full[:-2]) & (full[1:-1] >= full[2:])
    if not inner.any():
        return 0.0
    cand = np.where(inner, seg, -np.inf)
    best = cand.max()
    if best <= 0:
        return 0.0
    k = int(np.flatnonzero(cand >= best - TEMPO_TIE_RTOL * abs(best))[0])
    lag = float(lo + k)
    y0, y1, y2 = ac[lo + k - 1], ac[lo + k], ac[lo + k + 1]
    denom = y0 - 2 * y1 + y2
    if denom < 0:
        lag += 0.5 * (y0 - y2) / denom
    return 60.0 * fps / lag


# -- thin slices -----------------------------------------------------------

@dataclass(frozen=True)
class SliceFeatures:
    """Per-slice records, one row per full 1 s slice, columns SLICE_STREAMS."""

    values: np.ndarray

    @property
    def n_slices(self) -> int:
        return self.values.shape[0]


def _exact_mean(v: np.ndarray) -> np.ndarray:
    # a constant column averages to itself, whatever the frame count
    m = v.mean(axis=0)
    return np.where(np.all(v == v[:1], axis=0), v[0], m)


def slice_features(clip: AudioClip, slice_s: float = 1.0,
                   tempo_context_s: float = TEMPO_CONTEXT_S) -> SliceFeatures:
    """Average frame streams within each non-overlapping slice.

    Frames belong to the slice containing their centre. Tempo is estimated
    once per slice from a ``tempo_context_s`` window centred on the slice
    (clipped to the clip), because a single 1 s slice is shorter than one
    beat period at slow tempi.
    """
    x, sr = clip.samples, clip.sample_rate
    slice_len = int(round(slice_s * sr))
    n_slices = x.size // slice_len
    if n_slices < 1:
        raise TooShortError(f"clip of {x.size / sr:.3f} s has no full {slice_s} s slice")
    spectra = stft(clip)
    coeffs = mfcc(spectra)
    scalars = scalar_descriptors(spectra)
    centres = np.arange(coeffs.shape[0]) * spectra.hop + spectra.frame_len / 2.0
    which = np.floor(centres / slice_len).astype(int)
    rows = []
    half_ctx = 0.5 * tempo_context_s * sr
    for s in range(n_slices):
        sel = which == s
        row = list(_exact_mean(coeffs[sel]))
        row += [float(_exact_mean(scalars[name][sel])) for name in SCALAR_STREAMS]
        mid = (s + 0.5) * slice_len
        a = int(max(0, round(mid - half_ctx)))
        b = int(min(x.size, round(mid + half_ctx)))
        row.append(tempo(x[a:b], sr))
        rows.append(row)
    return SliceFeatures(np.asarray(rows, dtype=float))


def _pop_sd(v: np.ndarray) -> np.ndarray:
    sd = v.std(axis=0)
    # identical values give exactly zero, independent of summation rounding
    sd[np.all(v == v[:1], axis=0)] = 0.0
    return sd


def aggregate_slices(slices: SliceFeatures | np.ndarray, window_s: int) -> np.ndarray:
    """Mean and population sd over the first ``window_s`` slices, 56-D layout."""
    v = slices.values if isinstance(slices, SliceFeatures) else np.asarray(slices, dtype=float)
    if not 1 <= window_s:
        raise ValueError("window must be at least one slice")
    if v.shape[0] < window_s:
        raise TooShortError(f"{v.shape[0]} slices available, window needs {window_s}")
    w = v[:window_s]
    mu, sd = w.mean(axis=0), _pop_sd(w)
    out = list(mu[:N_MFCC]) + list(sd[:N_MFCC])
    for j in range(N_MFCC, v.shape[1]):
        out += [mu[j], sd[j]]
    return np.asarray(out)


def thin_slice_aggregate(clip: AudioClip, window_s: int = 15) -> np.ndarray:
    if not 2 <= window_s <= 15:
        raise ValueError("window_s must be in 2..15")
    if clip.duration < window_s:
        raise TooShortError(f"clip of {clip.duration:.3f} s shorter than {window_s} s window")
    return aggregate_slices(slice_features(clip), window_s)
