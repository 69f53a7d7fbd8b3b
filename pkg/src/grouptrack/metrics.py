"""OSPA and windowed track-set OSPA tracking-error metrics.

The point-set metric pairs the two sets optimally with base distances cut off
at ``c``, charges ``c`` per unmatched point, and takes a p-norm average.  The
track-set variant applies the same construction to whole tracks, where the
base distance between two tracks is a windowed time-average of per-step
cut-off distances: steps where exactly one track exists contribute ``c``,
steps where neither exists contribute nothing (they also shrink the
normalizer), and tracks absent from the entire window are dropped from the
sets before assignment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

TrackSet = dict[int, dict[int, np.ndarray]]  # id -> step -> planar position


@dataclass(frozen=True)
class OspaParams:
    """Cutoff, inner/outer orders, window length and optional window weights."""

    cutoff: float = 50.0
    order: float = 1.0
    outer_order: float = 2.0
    window: int = 10
    weights: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if self.cutoff <= 0 or self.order < 1 or self.outer_order < 1 or self.window < 1:
            raise ValueError("need cutoff > 0, orders >= 1, window >= 1")
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float)
            if len(w) != self.window or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
                raise ValueError("weights must be nonnegative, sum to 1, length = window")


def _ospa_from_matrix(d: np.ndarray, c: float, p: float) -> float:
    n, m = d.shape
    if n == 0 and m == 0:
        return 0.0
    if n == 0 or m == 0:
        return float(c)
    cost = np.minimum(d, c) ** p
    rows, cols = linear_sum_assignment(cost)
    total = cost[rows, cols].sum() + c**p * (max(n, m) - min(n, m))
    return float((total / max(n, m)) ** (1.0 / p))


def ospa(a, b, cutoff: float = 50.0, order: float = 1.0) -> float:
    """Optimal-subpattern-assignment distance between two planar point sets."""
    if cutoff <= 0 or order < 1:
        raise ValueError("need cutoff > 0 and order >= 1")
    a = np.asarray(a, dtype=float).reshape(-1, 2)
    b = np.asarray(b, dtype=float).reshape(-1, 2)
    if len(a) == 0 and len(b) == 0:
        return 0.0
    if len(a) == 0 or len(b) == 0:
        return float(cutoff)
    d = np.linalg.norm(a[:, None, :] - b[None, :, :], axis=-1)
    return _ospa_from_matrix(d, cutoff, order)


def _window_steps(step: int, params: OspaParams) -> list[int]:
    return [t for t in range(step - params.window + 1, step + 1) if t >= 1]


def _track_base_distance(
    tx: dict[int, np.ndarray],
    ty: dict[int, np.ndarray],
    steps: list[int],
    weights: np.ndarray,
    c: float,
    p: float,
) -> float:
    num = 0.0
    den = 0.0
    for t, w in zip(steps, weights):
        in_x = t in tx
        in_y = t in ty
        if not in_x and not in_y:
            continue
        if in_x and in_y:
            d = min(c, float(np.linalg.norm(np.asarray(tx[t]) - np.asarray(ty[t]))))
        else:
            d = c
        num += w * d**p
        den += w
    if den == 0.0:
        return 0.0
    return float((num / den) ** (1.0 / p))


def _active(tracks: TrackSet, steps: list[int]) -> list[int]:
    return sorted(tid for tid, per in tracks.items() if any(t in per for t in steps))


def _base_matrix(
    truth: TrackSet, estimate: TrackSet, params: OspaParams, step: int
) -> tuple[np.ndarray, list[int], list[int]]:
    steps = _window_steps(step, params)
    if params.weights is not None:
        weights = np.asarray(params.weights, dtype=float)[-len(steps) :]
    else:
        weights = np.ones(len(steps))
    rows = _active(truth, steps)
    cols = _active(estimate, steps)
    d = np.empty((len(rows), len(cols)))
    for i, tid in enumerate(rows):
        for j, eid in enumerate(cols):
            d[i, j] = _track_base_distance(
                truth[tid], estimate[eid], steps, weights, params.cutoff, params.order
            )
    return d, rows, cols


def ospa2(truth: TrackSet, estimate: TrackSet, params: OspaParams, step: int) -> float:
    """Track-set OSPA at ``step`` using the trailing window of ``params``."""
    d, _, _ = _base_matrix(truth, estimate, params, step)
    return _ospa_from_matrix(d, params.cutoff, params.outer_order)


def ospa2_decomposed(
    truth: TrackSet,
    estimate: TrackSet,
    params: OspaParams,
    step: int,
    subsets: dict[str, tuple[int, ...]],
) -> dict[str, float]:
    """Total track-set OSPA plus per-truth-subset components.

    The full-set optimal assignment is computed once; a subset's component
    re-scores the assignment restricted to its truth tracks, so estimate
    tracks matched elsewhere (or unmatched false tracks) only affect the
    total.  Subsets with no window-active truth track score 0.
    """
    c, q = params.cutoff, params.outer_order
    d, rows, cols = _base_matrix(truth, estimate, params, step)
    out = {"total": _ospa_from_matrix(d, c, q)}
    match: dict[int, float] = {}
    if d.size:
        r_idx, c_idx = linear_sum_assignment(np.minimum(d, c) ** q)
        match = {rows[i]: float(min(d[i, j], c)) for i, j in zip(r_idx, c_idx)}
    for name, ids in subsets.items():
        active = [tid for tid in rows if tid in ids]
        if not active:
            out[name] = 0.0
            continue
        total = sum(match.get(tid, c) ** q for tid in active)
        out[name] = float((total / len(active)) ** (1.0 / q))
    return out
