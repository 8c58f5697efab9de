"""Dynamic Time Warping distances between R(t) trends.

Two step patterns are supported:

- symmetric1: D(i,j) = |x_i - y_j| + min(D(i-1,j), D(i,j-1), D(i-1,j-1))
- symmetric2: like symmetric1 but diagonal steps double-count the local
  cost, D(i,j) = min(D(i-1,j) + d, D(i,j-1) + d, D(i-1,j-1) + 2d), with
  the first cell initialized to 2*d(0,0) (the entry counts as diagonal).

Normalization divides by max(N, M) for symmetric1 and by N + M for
symmetric2, making trends of different valid lengths comparable. An
optional Sakoe-Chiba band constrains |i - j|.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import UnitId
from .errors import AllInvalid, EmptySeries, InfeasibleWindow
from .repro import RtSeries

try:  # numba speeds the DP kernel up ~100x; plain python fallback is fine
    from numba import njit
except ImportError:  # pragma: no cover
    def njit(*args, **kwargs):
        def wrap(fn):
            return fn
        return wrap if not (args and callable(args[0])) else args[0]


@dataclass(frozen=True)
class DtwConfig:
    step_pattern: str = "symmetric2"
    window: Optional[int] = None  # Sakoe-Chiba band half-width, None = off
    normalize: bool = True

    def __post_init__(self):
        if self.step_pattern not in ("symmetric1", "symmetric2"):
            raise ValueError(f"unknown step pattern {self.step_pattern!r}")
        if self.window is not None and self.window < 0:
            raise ValueError("band half-width must be >= 0")


@dataclass(frozen=True)
class DistanceMatrix:
    units: tuple[UnitId, ...]
    d: np.ndarray  # (n, n) symmetric, zero diagonal

    def __post_init__(self):
        n = len(self.units)
        if self.d.shape != (n, n):
            raise ValueError("matrix shape does not match unit count")

    def index_of(self, unit_id: str) -> int:
        for i, u in enumerate(self.units):
            if u.id == unit_id:
                return i
        raise KeyError(unit_id)


@njit(cache=True)
def _dp_cost(x, y, sym2, band):  # pragma: no cover - exercised via dtw_distance
    n = x.shape[0]
    m = y.shape[0]
    inf = np.inf
    big = np.empty((n, m))
    for i in range(n):
        for j in range(m):
            big[i, j] = inf
    for i in range(n):
        jlo = 0 if band < 0 else max(0, i - band)
        jhi = m if band < 0 else min(m, i + band + 1)
        for j in range(jlo, jhi):
            d = abs(x[i] - y[j])
            if i == 0 and j == 0:
                big[i, j] = 2.0 * d if sym2 else d
                continue
            best = inf
            if i > 0 and big[i - 1, j] + d < best:
                best = big[i - 1, j] + d
            if j > 0 and big[i, j - 1] + d < best:
                best = big[i, j - 1] + d
            if i > 0 and j > 0:
                diag = big[i - 1, j - 1] + (2.0 * d if sym2 else d)
                if diag < best:
                    best = diag
            big[i, j] = best
    return big[n - 1, m - 1]


def dtw_distance(x: Sequence[float], y: Sequence[float], cfg: DtwConfig = DtwConfig()) -> float:
    """DTW distance between two gap-free real sequences."""
    xa = np.asarray(x, dtype=float)
    ya = np.asarray(y, dtype=float)
    if xa.size == 0 or ya.size == 0:
        raise EmptySeries("DTW inputs must be nonempty")
    band = -1
    if cfg.window is not None:
        if cfg.window < abs(xa.size - ya.size):
            raise InfeasibleWindow(
                f"band {cfg.window} < length difference {abs(xa.size - ya.size)}"
            )
        band = int(cfg.window)
    sym2 = cfg.step_pattern == "symmetric2"
    cost = float(_dp_cost(xa, ya, sym2, band))
    if cfg.normalize:
        cost /= (xa.size + ya.size) if sym2 else max(xa.size, ya.size)
    return cost


def trend_values(rt: RtSeries) -> np.ndarray:
    """Valid-run extraction for DTW: trim invalid ends, interpolate gaps."""
    valid = np.asarray(rt.valid, dtype=bool)
    idx = np.flatnonzero(valid)
    if idx.size == 0:
        raise AllInvalid(rt.unit.id)
    vals = np.asarray(rt.values, dtype=float)
    lo, hi = idx[0], idx[-1] + 1
    inner = np.arange(lo, hi)
    return np.interp(inner, idx, vals[idx])


def distance_matrix(
    trends: Sequence[RtSeries], cfg: DtwConfig = DtwConfig(), threads: int = 1
) -> DistanceMatrix:
    """Full pairwise DTW matrix over per-unit trends, in canonical order."""
    if len(trends) < 2:
        raise EmptySeries("need at least 2 units for a distance matrix")
    ordered = sorted(trends, key=lambda t: t.unit.id)
    seqs = [trend_values(t) for t in ordered]
    n = len(ordered)
    d = np.zeros((n, n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]

    def one(pair):
        i, j = pair
        return i, j, dtw_distance(seqs[i], seqs[j], cfg)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, pairs))
    else:
        results = [one(p) for p in pairs]
    for i, j, v in results:
        d[i, j] = v
        d[j, i] = v
    return DistanceMatrix(tuple(t.unit for t in ordered), d)
