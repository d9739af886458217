"""MSE-ADPIT: permutation-invariant multi-ACCDOA loss with analytic gradients.

For every (class, frame) cell with ``a`` active events, each of the 3 output
tracks is assigned one event such that every event is used at least once
(auxiliary duplication); with no events all tracks target zero. The cell loss
is the minimum over these assignments of the track-averaged per-track loss,
and the total is the mean over cells.

The per-cell search runs in a numba kernel; with ``SELDKIT_DISABLE_NUMBA``
set, an equivalent vectorised numpy path is used. Both produce bit-identical
results.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import _accel
from .core import N_TRACKS
from .errors import DomainError
from .codec import check_prediction_tensor


@dataclass(frozen=True)
class Assignment:
    """Track -> event map; ``map`` is all -1 for the zero-target assignment."""

    map: tuple
    arity: int

    @property
    def is_zero_target(self):
        return self.arity == 0


def enumerate_assignments(a):
    """All surjections from the 3 tracks onto ``a`` events, lexicographic order."""
    if not 0 <= a <= N_TRACKS:
        raise DomainError(f"cannot assign {N_TRACKS} tracks to {a} events")
    if a == 0:
        return [Assignment((-1,) * N_TRACKS, 0)]
    return [Assignment(m, a) for m in itertools.product(range(a), repeat=N_TRACKS)
            if len(set(m)) == a]


def _assignment_table():
    rows, offsets, counts = [], [], []
    for a in range(N_TRACKS + 1):
        offsets.append(len(rows))
        maps = [s.map for s in enumerate_assignments(a)]
        counts.append(len(maps))
        rows.extend(maps)
    return (np.array(rows, dtype=np.int64), np.array(offsets, dtype=np.int64),
            np.array(counts, dtype=np.int64))


ASSIGN_MAPS, ASSIGN_OFFSETS, ASSIGN_COUNTS = _assignment_table()
MAX_ASSIGN = int(ASSIGN_COUNTS.max())


def per_track_loss(pred, target, dist_weight=1.0):
    """Squared error averaged over ``(Rx, Ry, Rz, D)``; distance error scaled by ``dist_weight``."""
    dx = pred[0] - target[0]
    dy = pred[1] - target[1]
    dz = pred[2] - target[2]
    dd = pred[3] - target[3]
    return (dx * dx + dy * dy + dz * dz + dist_weight * (dd * dd)) / 4.0


@_accel.njit
def _cells_kernel(pred, doa, dist, count, w, maps, offsets, counts, cell_min, arg, grad):
    n_tracks, n_classes, _, n_frames = pred.shape
    pair = np.empty((3, 3))
    zero = np.empty(3)
    for c in range(n_classes):
        for t in range(n_frames):
            a = count[c, t]
            for n in range(n_tracks):
                px = pred[n, c, 0, t]
                py = pred[n, c, 1, t]
                pz = pred[n, c, 2, t]
                pd = pred[n, c, 3, t]
                zero[n] = (px * px + py * py + pz * pz + w * (pd * pd)) / 4.0
                for e in range(a):
                    dx = px - doa[c, t, e, 0]
                    dy = py - doa[c, t, e, 1]
                    dz = pz - doa[c, t, e, 2]
                    dd = pd - dist[c, t, e]
                    pair[n, e] = (dx * dx + dy * dy + dz * dz + w * (dd * dd)) / 4.0
            best = np.inf
            best_i = 0
            for i in range(counts[a]):
                row = offsets[a] + i
                if a == 0:
                    cost = (zero[0] + zero[1] + zero[2]) / 3.0
                else:
                    cost = (pair[0, maps[row, 0]] + pair[1, maps[row, 1]]
                            + pair[2, maps[row, 2]]) / 3.0
                if cost < best:
                    best = cost
                    best_i = i
            cell_min[c, t] = best
            arg[c, t] = best_i
            row = offsets[a] + best_i
            for n in range(n_tracks):
                e = maps[row, n]
                for k in range(3):
                    tk = doa[c, t, e, k] if e >= 0 else 0.0
                    grad[n, c, k, t] = 2.0 * (pred[n, c, k, t] - tk) / (4.0 * n_tracks)
                td = dist[c, t, e] if e >= 0 else 0.0
                grad[n, c, 3, t] = 2.0 * w * (pred[n, c, 3, t] - td) / (4.0 * n_tracks)


def _cells_numba(pred, sets, w):
    n_tracks, n_classes, _, n_frames = pred.shape
    cell_min = np.empty((n_classes, n_frames))
    arg = np.empty((n_classes, n_frames), dtype=np.int64)
    grad = np.empty(pred.shape)  # C order, like the numpy path
    _cells_kernel(np.ascontiguousarray(pred), np.ascontiguousarray(sets.doa),
                  np.ascontiguousarray(sets.distance), np.ascontiguousarray(sets.count, dtype=np.int64),
                  float(w), ASSIGN_MAPS, ASSIGN_OFFSETS, ASSIGN_COUNTS, cell_min, arg, grad)
    return cell_min, arg, grad


def _cells_numpy(pred, sets, w):
    n_tracks = pred.shape[0]
    p = pred.transpose(1, 3, 0, 2)  # (C, T, N, 4)
    tgt = np.concatenate([sets.doa, sets.distance[..., None]], axis=-1)  # (C, T, E, 4)

    def loss(d):
        sq = d * d
        return (sq[..., 0] + sq[..., 1] + sq[..., 2] + w * sq[..., 3]) / 4.0

    pair = loss(p[:, :, :, None, :] - tgt[:, :, None, :, :])  # (C, T, N, E)
    zero = loss(p)  # (C, T, N)
    count = sets.count
    costs = np.full(count.shape + (MAX_ASSIGN,), np.inf)
    costs[..., 0] = np.where(count == 0, (zero[..., 0] + zero[..., 1] + zero[..., 2]) / 3.0, np.inf)
    for a in range(1, N_TRACKS + 1):
        mask = count == a
        if not mask.any():
            continue
        maps = ASSIGN_MAPS[ASSIGN_OFFSETS[a]:ASSIGN_OFFSETS[a] + ASSIGN_COUNTS[a]]
        sub = pair[mask]  # (k, N, E)
        cost = (sub[:, 0, maps[:, 0]] + sub[:, 1, maps[:, 1]] + sub[:, 2, maps[:, 2]]) / 3.0
        block = np.full((len(sub), MAX_ASSIGN), np.inf)
        block[:, :len(maps)] = cost
        costs[mask] = block
    arg = np.argmin(costs, axis=-1)
    cell_min = np.take_along_axis(costs, arg[..., None], axis=-1)[..., 0]

    rows = ASSIGN_OFFSETS[count] + arg  # (C, T)
    ev = ASSIGN_MAPS[rows]  # (C, T, N)
    safe = np.maximum(ev, 0)
    chosen = np.take_along_axis(tgt, safe[..., None], axis=2)  # (C, T, N, 4)
    chosen = np.where((ev >= 0)[..., None], chosen, 0.0)
    weights = np.array([1.0, 1.0, 1.0, w])
    g = 2.0 * weights * (p - chosen) / (4.0 * n_tracks)
    return cell_min, arg.astype(np.int64), np.ascontiguousarray(g.transpose(2, 0, 3, 1))


@dataclass(frozen=True)
class LossResult:
    value: float
    cell_losses: np.ndarray  # (C, T) per-cell minima
    argmin: np.ndarray  # (C, T) index into enumerate_assignments(count[c, t])
    counts: np.ndarray  # (C, T) active events per cell
    gradient: np.ndarray | None = None

    def assignment(self, c, t):
        return enumerate_assignments(int(self.counts[c, t]))[int(self.argmin[c, t])]


def _check(pred, sets):
    pred = check_prediction_tensor(pred)
    if pred.shape[1] != sets.n_classes or pred.shape[3] != sets.n_frames:
        raise DomainError(f"prediction shape {pred.shape} does not match targets "
                          f"({sets.n_classes} classes, {sets.n_frames} frames)")
    if np.any(sets.count < 0) or np.any(sets.count > N_TRACKS):
        raise DomainError(f"active event counts must lie in 0..{N_TRACKS}")
    return pred


def _evaluate(pred, sets, dist_weight, backend):
    if backend is None:
        backend = "numba" if _accel.use_numba() else "numpy"
    if backend == "numba":
        return _cells_numba(pred, sets, dist_weight)
    if backend == "numpy":
        return _cells_numpy(pred, sets, dist_weight)
    raise ValueError(f"unknown backend {backend!r}")


def adpit_loss(pred, sets, dist_weight=1.0, backend=None):
    """Loss value and per-cell argmin assignments (no gradient)."""
    pred = _check(pred, sets)
    cell_min, arg, _ = _evaluate(pred, sets, dist_weight, backend)
    n_cells = cell_min.size
    value = float(np.sum(cell_min) / n_cells) if n_cells else 0.0
    return LossResult(value, cell_min, arg, sets.count.copy())


def adpit_loss_grad(pred, sets, dist_weight=1.0, backend=None):
    """As :func:`adpit_loss`, plus the gradient w.r.t. ``pred`` at the recorded argmin."""
    pred = _check(pred, sets)
    cell_min, arg, grad = _evaluate(pred, sets, dist_weight, backend)
    n_cells = cell_min.size
    value = float(np.sum(cell_min) / n_cells) if n_cells else 0.0
    if n_cells:
        grad = grad / n_cells
    return LossResult(value, cell_min, arg, sets.count.copy(), grad)
