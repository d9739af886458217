"""Brute-force reference implementations, deliberately independent of seldkit internals."""

import itertools
import math

import numpy as np

from seldkit.core import EventAnnotation
from seldkit.io import MetadataTable


def surjections(n_tracks, a):
    """All maps {0..n_tracks-1} -> {0..a-1} that hit every event."""
    if a == 0:
        return [None]
    return [m for m in itertools.product(range(a), repeat=n_tracks) if set(m) == set(range(a))]


def materialized_adpit(pred, events, dist_weight=1.0):
    """Per-cell minima over explicitly built duplicated target blocks.

    ``events[c][t]`` is a list of ``(doa, distance)``; returns (C, T) minima.
    """
    n_tracks, n_classes, _, n_frames = pred.shape
    out = np.empty((n_classes, n_frames))
    for c in range(n_classes):
        for t in range(n_frames):
            evs = events[c][t]
            best = np.inf
            for m in surjections(n_tracks, len(evs)):
                target = np.zeros((n_tracks, 4))
                if m is not None:
                    for n in range(n_tracks):
                        doa, dist = evs[m[n]]
                        target[n, :3] = doa
                        target[n, 3] = dist
                per_track = []
                for n in range(n_tracks):
                    d = [pred[n, c, k, t] - target[n, k] for k in range(4)]
                    per_track.append((d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
                                      + dist_weight * (d[3] * d[3])) / 4.0)
                cost = (per_track[0] + per_track[1] + per_track[2]) / 3.0
                best = min(best, cost)
            out[c, t] = best
    return out


def brute_force_assignment_cost(cost):
    """Minimum total cost (exactly rounded sums) over all matchings of size min(m, n)."""
    m, n = cost.shape
    if m <= n:
        return min(math.fsum(cost[i, p[i]] for i in range(m)) for p in itertools.permutations(range(n), m))
    return min(math.fsum(cost[p[j], j] for j in range(n)) for p in itertools.permutations(range(m), n))


def random_events(rng, n_classes, n_frames, p_active=0.6):
    """Nested ``events[c][t]`` lists of up to 3 random (unit doa, distance) pairs."""
    out = []
    for _ in range(n_classes):
        row = []
        for _ in range(n_frames):
            k = int(rng.integers(0, 4)) if rng.random() < p_active else 0
            evs = []
            for _ in range(k):
                v = rng.normal(size=3)
                evs.append((v / np.linalg.norm(v), float(rng.uniform(0.3, 5.0))))
            row.append(evs)
        out.append(row)
    return out


def random_table(rng, n_frames=30, n_classes=13, max_rows=80, integer=True):
    """A valid metadata table with integer angles and whole-centimetre distances."""
    rows = {}
    for _ in range(int(rng.integers(0, max_rows + 1))):
        frame = int(rng.integers(0, n_frames))
        cls = int(rng.integers(0, n_classes))
        src = int(rng.integers(0, 3))
        if integer:
            az = float(rng.integers(-179, 181))
            el = float(rng.integers(-89, 90))
        else:
            az = float(rng.uniform(-179.9, 180.0))
            el = float(rng.uniform(-89.9, 89.9))
        dist = int(rng.integers(30, 500)) / 100.0
        rows[(frame, cls, src)] = EventAnnotation(frame, cls, src, az, el, dist)
    return MetadataTable(tuple(rows.values()))
