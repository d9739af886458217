"""Synthetic plane-wave FOA scenes for tests, demos and the overfit check.

A far-field source with signal ``s`` from direction ``(x, y, z)`` encodes as
``W = s, X = s*x, Y = s*y, Z = s*z``.
"""

from __future__ import annotations

import numpy as np

from .core import LABEL_HOP, SAMPLE_RATE, EventAnnotation, FoaClip, W, X, Y, Z, sph_to_cart
from .io import MetadataTable


def encode_plane_wave(signal, azimuth, elevation):
    """(4, n) WYZX samples of a mono ``signal`` arriving from (azimuth, elevation)."""
    d = sph_to_cart(azimuth, elevation)
    s = np.asarray(signal, dtype=np.float64)
    out = np.empty((4, s.size))
    out[W] = s
    out[X] = s * d[0]
    out[Y] = s * d[1]
    out[Z] = s * d[2]
    return out


def plane_wave_clip(azimuth, elevation, seconds=1.0, seed=0, amplitude=0.1):
    """White-noise plane wave lasting ``seconds``."""
    rng = np.random.default_rng(seed)
    n = int(round(seconds * SAMPLE_RATE))
    return FoaClip(encode_plane_wave(amplitude * rng.standard_normal(n), azimuth, elevation))


def static_source_scene(azimuth=30.0, elevation=10.0, distance=1.5, class_id=2,
                        seconds=5.0, active=(10, 40), seed=0, amplitude=0.1):
    """One static source active over label frames ``[active[0], active[1])``.

    Returns ``(clip, table)``; the rest of the clip is silent.
    """
    rng = np.random.default_rng(seed)
    n = int(round(seconds * SAMPLE_RATE))
    s = np.zeros(n)
    lo, hi = active[0] * LABEL_HOP, min(active[1] * LABEL_HOP, n)
    s[lo:hi] = amplitude * rng.standard_normal(hi - lo)
    clip = FoaClip(encode_plane_wave(s, azimuth, elevation))
    rows = tuple(EventAnnotation(f, class_id, 0, azimuth, elevation, distance)
                 for f in range(active[0], active[1]))
    return clip, MetadataTable(rows)
