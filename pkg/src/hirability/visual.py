"""Thin-slice motion statistics from per-frame face/gaze tracks."""

from __future__ import annotations

import logging

import numpy as np

from .core import TooShortError, ValidationError
from .ingest import VisualTrack

log = logging.getLogger(__name__)

FEATURE_NAMES = (
    "mu_lm", "sigma_lm", "mu_gz", "sigma_gz", "mu_gzx", "sigma_gzx",
    "mu_gzy", "sigma_gzy", "mu_ep", "sigma_ep",
)


def _slice_motion(track: VisualTrack, sel: np.ndarray) -> list[float]:
    lm = track.landmarks[sel]
    gz = track.gaze[sel]
    disp = np.linalg.norm(np.diff(lm, axis=0), axis=2).mean(axis=1)
    cosang = np.clip(np.sum(gz[1:] * gz[:-1], axis=1), -1.0, 1.0)
    return [
        float(disp.mean()),
        float(np.arccos(cosang).mean()),
        float(np.abs(np.diff(track.pan[sel])).mean()),
        float(np.abs(np.diff(track.tilt[sel])).mean()),
        float(track.eye_contact[sel].mean()),
    ]


def per_slice_series(track: VisualTrack, slice_s: float = 1.0) -> np.ndarray:
    """(n_slices, 5): landmark, gaze, pan, tilt motion per frame pair and eye-contact share.

    Slices are anchored at the first timestamp; slices with fewer than two
    frames are skipped.
    """
    if not np.all(np.isfinite(track.landmarks)):
        k = int(np.flatnonzero(~np.isfinite(track.landmarks).all(axis=(1, 2)))[0])
        raise ValidationError(f"frame {k} has a missing landmark")
    if len(track) < 2:
        raise TooShortError("track has fewer than two frames")
    rel = track.t - track.t[0]
    which = np.floor(rel / slice_s + 1e-9).astype(int)
    rows = []
    for s in range(int(which.max()) + 1):
        sel = np.flatnonzero(which == s)
        if sel.size < 2:
            log.warning("slice %d has %d frame(s); skipped", s, sel.size)
            continue
        rows.append(_slice_motion(track, sel))
    if len(rows) < 2:
        raise TooShortError(f"track yields {len(rows)} usable slice(s); need at least 2")
    return np.asarray(rows)


def slice_motion_stats(track: VisualTrack, slice_s: float = 1.0) -> np.ndarray:
    series = per_slice_series(track, slice_s)
    mu = series.mean(axis=0)
    sd = series.std(axis=0)
    sd[np.all(series == series[:1], axis=0)] = 0.0
    return np.column_stack([mu, sd]).ravel()


def trait_feature_correlations(features, labels, alpha: float = 0.05):
    """Pearson r of each visual statistic against each IOCEAN trait."""
    from .core import TRAITS
    from .explain import correlation_matrix

    Y = np.array([[tv.get(t) for t in TRAITS] for tv in labels]) if not isinstance(labels, np.ndarray) else labels
    return correlation_matrix(features, Y, alpha, feature_names=FEATURE_NAMES, trait_names=TRAITS)
