"""Multi-ACCDOA (with distance) target encoding and prediction decoding.

A prediction tensor has shape ``(N=3, C=13, 4, T)``; the third axis holds
``(Rx, Ry, Rz, D)``. Activity is the length of ``R``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import N_CLASSES, N_TRACKS, EventAnnotation, angular_distance, cart_to_sph, sph_to_cart
from .errors import DataError, DomainError
from .io import MetadataTable

ACTIVITY_THRESHOLD = 0.5
MERGE_RADIUS_DEG = 15.0
MIN_DISTANCE_M = 0.01  # smallest distance a metadata row can carry (1 cm)


@dataclass(frozen=True)
class ActiveEventSet:
    """Active events per (class, label frame), stored densely.

    ``doa[c, t, e]`` and ``distance[c, t, e]`` are valid for ``e < count[c, t]``;
    unused slots are zero.
    """

    doa: np.ndarray  # (C, T, 3, 3)
    distance: np.ndarray  # (C, T, 3)
    count: np.ndarray  # (C, T) int

    @classmethod
    def empty(cls, n_frames, n_classes=N_CLASSES):
        return cls(np.zeros((n_classes, n_frames, N_TRACKS, 3)),
                   np.zeros((n_classes, n_frames, N_TRACKS)),
                   np.zeros((n_classes, n_frames), dtype=np.int64))

    @classmethod
    def from_lists(cls, events):
        """Build from nested lists ``events[c][t] = [(doa, distance), ...]``."""
        n_classes, n_frames = len(events), len(events[0]) if events else 0
        out = cls.empty(n_frames, n_classes)
        for c in range(n_classes):
            for t in range(n_frames):
                items = events[c][t]
                if len(items) > N_TRACKS:
                    raise DataError(f"{len(items)} events for class {c} frame {t}, max {N_TRACKS}")
                for e, (doa, dist) in enumerate(items):
                    out.doa[c, t, e] = doa
                    out.distance[c, t, e] = dist
                out.count[c, t] = len(items)
        return out

    @property
    def n_classes(self):
        return self.count.shape[0]

    @property
    def n_frames(self):
        return self.count.shape[1]

    def events(self, c, t):
        k = int(self.count[c, t])
        return [(self.doa[c, t, e].copy(), float(self.distance[c, t, e])) for e in range(k)]


def annotations_to_active_sets(table, n_frames):
    """Group a metadata table into per (class, frame) active event sets."""
    sets = ActiveEventSet.empty(n_frames)
    for r in table:
        if r.frame >= n_frames:
            continue
        k = sets.count[r.class_id, r.frame]
        if k >= N_TRACKS:
            raise DataError(f"more than {N_TRACKS} simultaneous sources of class "
                            f"{r.class_id} at frame {r.frame}")
        sets.doa[r.class_id, r.frame, k] = sph_to_cart(r.azimuth, r.elevation)
        sets.distance[r.class_id, r.frame, k] = r.distance
        sets.count[r.class_id, r.frame] = k + 1
    return sets


def active_sets_to_tensor(sets):
    """Perfect prediction tensor (N, C, 4, T): event ``e`` on track ``e``, activity 1."""
    out = np.zeros((N_TRACKS, sets.n_classes, 4, sets.n_frames))
    for n in range(N_TRACKS):
        on = sets.count > n
        out[n, :, :3, :] = np.where(on[..., None], sets.doa[:, :, n], 0.0).transpose(0, 2, 1)
        out[n, :, 3, :] = np.where(on, sets.distance[:, :, n], 0.0)
    return out


def check_prediction_tensor(p):
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 4 or p.shape[0] != N_TRACKS or p.shape[2] != 4:
        raise DomainError(f"prediction tensor must be (3, C, 4, T), got {p.shape}")
    if not np.all(np.isfinite(p)):
        raise DomainError("prediction tensor contains non-finite values")
    return p


@dataclass(frozen=True)
class DecodedEvent:
    class_id: int
    doa: np.ndarray
    distance: float
    activity: float


@dataclass(frozen=True)
class DecodedEvents:
    frames: tuple  # frames[t] -> tuple of DecodedEvent

    def __len__(self):
        return sum(len(f) for f in self.frames)


def _partitions(items):
    """All set partitions of ``items`` (a list), as lists of blocks."""
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _partitions(rest):
        yield [[first]] + part
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]


def _merge_groups(doas, radius):
    """Fewest groups of tracks whose members are pairwise within ``radius`` degrees.

    A minimum clique cover, so dropping a track can never increase the number
    of groups. Ties go to the smallest summed within-group angle, then to the
    first partition in enumeration order.
    """
    k = len(doas)
    ang = [[angular_distance(doas[i], doas[j]) for j in range(k)] for i in range(k)]
    best, best_key = None, None
    for part in _partitions(list(range(k))):
        spread = 0.0
        for block in part:
            for a in range(len(block)):
                for b in range(a + 1, len(block)):
                    d = ang[block[a]][block[b]]
                    if d > radius:
                        spread = None
                        break
                    spread += d
                if spread is None:
                    break
            if spread is None:
                break
        if spread is None:
            continue
        key = (len(part), spread)
        if best_key is None or key < best_key:
            best, best_key = part, key
    return sorted((sorted(b) for b in best), key=lambda b: b[0])


def decode_predictions(p, threshold=ACTIVITY_THRESHOLD, merge_radius=MERGE_RADIUS_DEG):
    """Turn a prediction tensor into per-frame events.

    A track is active when ``|R| > threshold``. Active same-class tracks that
    lie pairwise within ``merge_radius`` degrees become one event with the
    normalised mean direction, the mean distance and the largest activity.
    """
    p = check_prediction_tensor(p)
    n_tracks, n_classes, _, n_frames = p.shape
    norms = np.linalg.norm(p[:, :, :3, :], axis=2)  # (N, C, T)
    frames = []
    for t in range(n_frames):
        events = []
        for c in range(n_classes):
            active = [n for n in range(n_tracks) if norms[n, c, t] > threshold]
            if not active:
                continue
            doas = [p[n, c, :3, t] / norms[n, c, t] for n in active]
            dists = [max(p[n, c, 3, t], 0.0) for n in active]
            for group in _merge_groups(doas, merge_radius):
                if len(group) == 1:
                    i = group[0]
                    doa, dist = doas[i], dists[i]
                else:
                    mean = np.sum([doas[i] for i in group], axis=0)
                    doa = mean / np.linalg.norm(mean)
                    dist = float(np.mean([dists[i] for i in group]))
                act = max(float(norms[active[i], c, t]) for i in group)
                events.append(DecodedEvent(c, doa, float(dist), act))
        frames.append(tuple(events))
    return DecodedEvents(tuple(frames))


def events_to_metadata(decoded):
    """Metadata rows for decoded events; source ids count up per (frame, class)."""
    rows = []
    for t, events in enumerate(decoded.frames):
        next_id = {}
        for ev in events:
            sid = next_id.get(ev.class_id, 0)
            next_id[ev.class_id] = sid + 1
            az, el = cart_to_sph(ev.doa)
            rows.append(EventAnnotation(t, ev.class_id, sid, az, el,
                                        max(ev.distance, MIN_DISTANCE_M)))
    return MetadataTable(tuple(rows))
