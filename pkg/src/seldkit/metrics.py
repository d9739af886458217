"""Segment-based SELD scoring with spatial thresholds (DCASE 2024 task 3 style).

Events are aggregated into 1 s segments (10 label frames). Inside each
(segment, class) predictions are matched to references with the Hungarian
algorithm on angular distance. A matched pair is a true positive when its
angular error is at most 20 degrees and its relative distance error at most
1.0; otherwise it counts as one false positive and one false negative.
Counts are pooled over all segments and classes (micro-averaging).
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass

import numpy as np

from . import _accel
from .core import SEGMENT_FRAMES, angular_distance_matrix, sph_to_cart
from .errors import DataError, FormatError

DOA_THRESHOLD_DEG = 20.0
RDE_THRESHOLD = 1.0
REPORT_FIELDS = ("tp", "fp", "fn", "f20", "doa_cd", "rde_cd", "n_matched")


# ---------------------------------------------------------------- Hungarian


@_accel.njit
def _hungarian_kernel(a, row_of_col):
    # shortest augmenting path with potentials; a is (n, m) with n <= m
    n, m = a.shape
    inf = np.inf
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=np.int64)
    way = np.zeros(m + 1, dtype=np.int64)
    minv = np.empty(m + 1)
    used = np.empty(m + 1, dtype=np.bool_)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv[:] = inf
        used[:] = False
        while True:
            used[j0] = True
            i0 = p[j0]
            delta = inf
            j1 = 0
            for j in range(1, m + 1):
                if not used[j]:
                    cur = a[i0 - 1, j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    for j in range(1, m + 1):
        row_of_col[j - 1] = p[j] - 1


def _hungarian_numpy(a, row_of_col):
    n, m = a.shape
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    p = np.zeros(m + 1, dtype=np.int64)
    way = np.zeros(m + 1, dtype=np.int64)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = np.full(m + 1, np.inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = p[j0]
            free = ~used[1:]
            cur = a[i0 - 1] - u[i0] - v[1:]
            better = free & (cur < minv[1:])
            minv[1:][better] = cur[better]
            way[1:][better] = j0
            cand = np.where(free, minv[1:], np.inf)
            j1 = int(np.argmin(cand)) + 1
            delta = cand[j1 - 1]
            u[p[used]] += delta
            v[used] -= delta
            minv[~used] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    row_of_col[:] = p[1:] - 1


def hungarian(cost, backend=None):
    """Minimum-cost matching of size ``min(m, n)`` for an (m, n) cost matrix.

    Returns ``(rows, cols)`` index arrays sorted by row.
    """
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2:
        raise ValueError(f"cost must be a 2-D matrix, got shape {cost.shape}")
    if cost.size == 0:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix contains non-finite entries")
    transposed = cost.shape[0] > cost.shape[1]
    a = np.ascontiguousarray(cost.T if transposed else cost)
    row_of_col = np.empty(a.shape[1], dtype=np.int64)
    if backend is None:
        backend = "numba" if _accel.use_numba() else "numpy"
    if backend == "numba":
        _hungarian_kernel(a, row_of_col)
    elif backend == "numpy":
        _hungarian_numpy(a, row_of_col)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    cols = np.nonzero(row_of_col >= 0)[0]
    rows = row_of_col[cols]
    if transposed:
        rows, cols = cols, rows
    order = np.argsort(rows, kind="stable")
    return rows[order], cols[order]


# ---------------------------------------------------------------- segments


@dataclass(frozen=True)
class SegmentEvent:
    class_id: int
    doa: np.ndarray
    distance: float
    origin: int


def segment_events(table, kind="reference"):
    """Group a table into ``{(segment, class): [SegmentEvent, ...]}``.

    ``kind`` only labels the origin ids (reference source ids or prediction
    emission ids); both are aggregated the same way: normalised vector mean
    of the per-frame directions and arithmetic mean of distances.
    """
    if kind not in ("reference", "prediction"):
        raise ValueError(f"kind must be 'reference' or 'prediction', not {kind!r}")
    acc = defaultdict(list)
    for r in table:
        acc[(r.frame // SEGMENT_FRAMES, r.class_id, r.source_id)].append(r)
    out = defaultdict(list)
    for (seg, cls, origin), rows in sorted(acc.items()):
        vecs = np.array([sph_to_cart(r.azimuth, r.elevation) for r in rows])
        mean = vecs.sum(axis=0)
        norm = np.linalg.norm(mean)
        doa = mean / norm if norm > 1e-12 else vecs[0]
        dist = float(np.mean([r.distance for r in rows]))
        out[(seg, cls)].append(SegmentEvent(cls, doa, dist, origin))
    return dict(out)


# ---------------------------------------------------------------- scoring


@dataclass(frozen=True)
class ScoreReport:
    tp: int
    fp: int
    fn: int
    f20: float
    doa_cd: float
    rde_cd: float
    n_matched: int


@dataclass
class ScoreAccumulator:
    """Raw counts and error sums; pooled across segments, classes and clips."""

    tp: int = 0
    fp: int = 0
    fn: int = 0
    doa_sum: float = 0.0
    rde_sum: float = 0.0
    n_matched: int = 0

    def merge(self, other):
        self.tp += other.tp
        self.fp += other.fp
        self.fn += other.fn
        self.doa_sum += other.doa_sum
        self.rde_sum += other.rde_sum
        self.n_matched += other.n_matched
        return self

    def report(self):
        denom = self.tp + 0.5 * (self.fp + self.fn)
        f20 = 100.0 * self.tp / denom if denom > 0 else 0.0
        doa = self.doa_sum / self.n_matched if self.n_matched else 0.0
        rde = self.rde_sum / self.n_matched if self.n_matched else 0.0
        return ScoreReport(self.tp, self.fp, self.fn, f20, doa, rde, self.n_matched)


def accumulate(pred, ref, acc=None, doa_threshold=DOA_THRESHOLD_DEG, rde_threshold=RDE_THRESHOLD):
    """Add the counts for one clip's predicted/reference tables to ``acc``."""
    acc = ScoreAccumulator() if acc is None else acc
    for r in ref:
        if not r.distance > 0:
            raise DataError(f"reference distance {r.distance} at frame {r.frame} must be > 0")
    pred_seg = segment_events(pred, "prediction")
    ref_seg = segment_events(ref, "reference")
    for key in sorted(set(pred_seg) | set(ref_seg)):
        p = pred_seg.get(key, [])
        g = ref_seg.get(key, [])
        if not p or not g:
            acc.fp += len(p)
            acc.fn += len(g)
            continue
        ang = angular_distance_matrix([e.doa for e in p], [e.doa for e in g])
        rows, cols = hungarian(ang)
        for i, j in zip(rows, cols):
            err = float(ang[i, j])
            rde = abs(p[i].distance - g[j].distance) / g[j].distance
            acc.n_matched += 1
            acc.doa_sum += err
            acc.rde_sum += rde
            if err <= doa_threshold and rde <= rde_threshold:
                acc.tp += 1
            else:
                acc.fp += 1
                acc.fn += 1
        acc.fp += len(p) - len(rows)
        acc.fn += len(g) - len(rows)
    return acc


def score(pred, ref):
    """Score a predicted metadata table against a reference table."""
    return accumulate(pred, ref).report()


def report_to_json(r):
    """Compact JSON with fixed field order and 4-decimal floats."""
    parts = [f'"tp":{int(r.tp)}', f'"fp":{int(r.fp)}', f'"fn":{int(r.fn)}',
             f'"f20":{r.f20:.4f}', f'"doa_cd":{r.doa_cd:.4f}', f'"rde_cd":{r.rde_cd:.4f}',
             f'"n_matched":{int(r.n_matched)}']
    return "{" + ",".join(parts) + "}"


def report_from_json(text):
    try:
        d = json.loads(text)
        return ScoreReport(int(d["tp"]), int(d["fp"]), int(d["fn"]), float(d["f20"]),
                           float(d["doa_cd"]), float(d["rde_cd"]), int(d["n_matched"]))
    except (ValueError, KeyError, TypeError) as exc:
        raise FormatError(f"invalid score report ({exc})") from None
