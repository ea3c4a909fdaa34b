"""Discriminative power (MR-PT curves), correlations and score tables."""

from __future__ import annotations

import enum
import math
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from itertools import combinations
from typing import Optional

import numpy as np

from .rng import SplitMix64, bounded, derive_seed

DEFAULT_THRESHOLDS = tuple(k / 100 for k in range(21))


class ResampleMode(str, enum.Enum):
    PER_THRESHOLD = "PerThreshold"
    SHARED_DRAWS = "SharedDraws"


class StatsError(ValueError):
    pass


@dataclass(frozen=True)
class DpConfig:
    """Settings for the MR-PT computation.

    ``PerThreshold`` redraws the bootstrap samples for every threshold, as in
    the textbook loop. ``SharedDraws`` draws each (pair, trial) once and
    re-thresholds the same means, which is ~21x cheaper and makes PT
    monotone in the threshold.
    """

    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    bootstrap_count: int = 1000
    seed: int = 0
    resample_mode: ResampleMode = ResampleMode.SHARED_DRAWS

    def __post_init__(self):
        object.__setattr__(self, "thresholds", tuple(float(f) for f in self.thresholds))
        object.__setattr__(self, "resample_mode", ResampleMode(self.resample_mode))
        t = self.thresholds
        if not t or any(f < 0 for f in t) or any(b <= a for a, b in zip(t, t[1:])):
            raise StatsError("thresholds must be non-empty, non-negative and strictly increasing")
        if self.bootstrap_count < 1:
            raise StatsError("bootstrap_count must be >= 1")


@dataclass(frozen=True)
class DpPoint:
    f: float
    mr: float
    pt: float


@dataclass(frozen=True)
class DpCurve:
    points: tuple[DpPoint, ...]
    pair_count: int = 0
    bootstrap_count: int = 0

    def rows(self) -> list[tuple[float, float, float]]:
        return [(p.f, p.mr, p.pt) for p in self.points]


def bootstrap_mean(scores: Sequence[float], rng: SplitMix64) -> float:
    """Mean of ``len(scores)`` values drawn with replacement.

    Values are summed left to right, so the result is reproducible bit for
    bit on any IEEE-754 platform.
    """
    n = len(scores)
    if n == 0:
        raise StatsError("cannot bootstrap an empty score list")
    total = 0.0
    for _ in range(n):
        total += scores[rng.index(n)]
    return total / n


def _bootstrap_means(x: np.ndarray, raw: np.ndarray) -> np.ndarray:
    # raw: (B, n) uint64 draws; cumsum accumulates strictly left to right
    n = x.shape[0]
    picked = x[bounded(raw, n).astype(np.intp)]
    return np.cumsum(picked, axis=1)[:, -1] / n


def _pair_means(xi: np.ndarray, xj: np.ndarray, stream_seed: int, b: int) -> tuple[np.ndarray, np.ndarray]:
    """Bootstrap means for ``b`` trials from one stream.

    Trial t consumes outputs ``t*(ni+nj) ... (t+1)*(ni+nj)-1``: first ``ni``
    indices into model i, then ``nj`` into model j.
    """
    ni, nj = xi.shape[0], xj.shape[0]
    width = ni + nj
    raw = SplitMix64(stream_seed).block(b * width).reshape(b, width)
    return _bootstrap_means(xi, raw[:, :ni]), _bootstrap_means(xj, raw[:, ni:])


def _tally(qi: np.ndarray, qj: np.ndarray, f: float) -> tuple[int, int, int]:
    """(EQ, GT(i,j), GT(j,i)); exact equal means fall to GT(j,i)."""
    margin = f * np.maximum(qi, qj)
    eq = np.abs(qi - qj) < margin
    gt_ij = ~eq & (qi > qj)
    n_eq = int(eq.sum())
    n_ij = int(gt_ij.sum())
    return n_eq, n_ij, qi.shape[0] - n_eq - n_ij


def dp_curve(matrix: Mapping[str, Sequence[float]], config: DpConfig = DpConfig()) -> DpCurve:
    """Minority rate and proportion of ties at each threshold.

    Models are processed in sorted-id order, and pair ``p`` (lexicographic
    over that order) draws from the stream ``derive_seed(seed, p)`` in
    SharedDraws mode or ``derive_seed(seed, p, t)`` for threshold ``t`` in
    PerThreshold mode. The curve is thus independent of input ordering and
    of how the work is scheduled.
    """
    if len(matrix) < 2:
        raise StatsError("need >= 2 models")
    ids = sorted(matrix)
    data = {}
    for m in ids:
        arr = np.asarray(matrix[m], dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise StatsError(f"model {m!r} has no scores")
        data[m] = arr
    pairs = list(combinations(ids, 2))
    b = config.bootstrap_count
    n_thr = len(config.thresholds)
    eq_tot = [0] * n_thr
    mr_tot = [0] * n_thr

    for p, (mi, mj) in enumerate(pairs):
        if config.resample_mode is ResampleMode.SHARED_DRAWS:
            qi, qj = _pair_means(data[mi], data[mj], derive_seed(config.seed, p), b)
        for t, f in enumerate(config.thresholds):
            if config.resample_mode is ResampleMode.PER_THRESHOLD:
                qi, qj = _pair_means(data[mi], data[mj], derive_seed(config.seed, p, t), b)
            n_eq, n_ij, n_ji = _tally(qi, qj, f)
            eq_tot[t] += n_eq
            mr_tot[t] += min(n_ij, n_ji)

    denom = b * len(pairs)
    points = tuple(DpPoint(f, mr_tot[t] / denom, eq_tot[t] / denom) for t, f in enumerate(config.thresholds))
    return DpCurve(points, len(pairs), b)


class CorrelationError(ValueError):
    pass


def _check_pair(x: Sequence[float], y: Sequence[float]) -> tuple[list[float], list[float]]:
    x, y = [float(v) for v in x], [float(v) for v in y]
    if len(x) != len(y):
        raise CorrelationError("vectors differ in length")
    if len(x) < 2:
        raise CorrelationError("need at least two observations")
    return x, y


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x, y = _check_pair(x, y)
    n = len(x)
    mx, my = math.fsum(x) / n, math.fsum(y) / n
    dx = [v - mx for v in x]
    dy = [v - my for v in y]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0 or syy == 0:
        raise CorrelationError("correlation undefined for a constant vector")
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def average_ranks(x: Sequence[float]) -> list[float]:
    """1-based ranks; tied values share the mean of the ranks they span."""
    order = sorted(range(len(x)), key=lambda k: x[k])
    ranks = [0.0] * len(x)
    k = 0
    while k < len(order):
        end = k
        while end + 1 < len(order) and x[order[end + 1]] == x[order[k]]:
            end += 1
        avg = (k + end) / 2 + 1
        for pos in range(k, end + 1):
            ranks[order[pos]] = avg
        k = end + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    x, y = _check_pair(x, y)
    return pearson(average_ranks(x), average_ranks(y))


@dataclass(frozen=True)
class TableRow:
    label: str
    model_id: str
    mean: Optional[float]
    count: int
    excluded: int = 0


def factuality_table(
    matrix: Mapping[str, Sequence[float]],
    labels: Optional[Mapping[str, str]] = None,
    excluded: Optional[Mapping[str, int]] = None,
) -> list[TableRow]:
    labels = labels or {}
    excluded = excluded or {}
    rows = []
    for model_id in set(matrix) | set(excluded):
        scores = list(matrix.get(model_id, ()))
        mean = math.fsum(scores) / len(scores) if scores else None
        rows.append(TableRow(labels.get(model_id, model_id), model_id, mean, len(scores), int(excluded.get(model_id, 0))))
    return sorted(rows, key=lambda r: (r.label, r.model_id))
