"""Synthetic renewal-equation epidemics with known ground-truth zones.

A scenario is a rows x cols lattice of unit cells, each belonging to a
region with its own piecewise-constant R profile. Every cell is simulated
independently from the renewal equation

    E[N_t] = R(t) * sum_{tau=1..min(t,L)} N_{t-tau} * w(tau)

with Poisson offspring noise, or with the expectation passed through
unchanged in deterministic mode. Per-cell RNG substreams are derived by
hashing (seed, cell id) with SHA-256 (first 8 bytes, big-endian), so runs
are reproducible regardless of evaluation order.
"""

from __future__ import annotations

import datetime as dt
import hashlib
import json
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Calendar, IncidenceSeries, UnitGeometry, UnitId
from .errors import DisconnectedRegion, InvalidProfile, UnitMismatch
from .repro import SerialInterval
from .zoner import Partition

SCENARIO_START = dt.date(2020, 2, 24)


@dataclass(frozen=True)
class Scenario:
    rows: int
    cols: int
    region_grid: tuple[tuple[str, ...], ...]  # region label per cell
    profiles: dict[str, tuple[tuple[float, int], ...]]  # label -> ((R, days), ...)
    initial_cases: float
    days: int
    rng_seed: int
    mode: str = "poisson"  # poisson | deterministic

    def __post_init__(self):
        if self.rows < 2 or self.cols < 2:
            raise InvalidProfile("lattice must be at least 2x2")
        if len(self.region_grid) != self.rows or any(
            len(r) != self.cols for r in self.region_grid
        ):
            raise InvalidProfile("region grid shape must match dims")
        if self.mode not in ("poisson", "deterministic"):
            raise InvalidProfile(f"unknown mode {self.mode!r}")
        for label in {c for row in self.region_grid for c in row}:
            if label not in self.profiles:
                raise InvalidProfile(f"region {label!r} has no profile")
            for r, days in self.profiles[label]:
                if r < 0 or days < 1:
                    raise InvalidProfile("profile segments need R >= 0 and days >= 1")


def cell_id(row: int, col: int) -> str:
    return f"r{row:03d}c{col:03d}"


def substream_rng(seed: int, name: str) -> np.random.Generator:
    """Deterministic per-cell generator: SHA-256 of "seed:name", 8 bytes."""
    digest = hashlib.sha256(f"{seed}:{name}".encode()).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "big"))


def expand_profile(segments: Sequence[tuple[float, int]], days: int) -> np.ndarray:
    vals = []
    for r, d in segments:
        vals.extend([float(r)] * int(d))
    if len(vals) < days:
        raise InvalidProfile(f"profile covers {len(vals)} days, need {days}")
    return np.asarray(vals[:days])


def simulate_renewal(
    profile: Sequence[float],
    si: SerialInterval,
    initial_cases: float,
    days: int,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """One renewal-equation run; rng=None means deterministic (no noise)."""
    if initial_cases < 1:
        raise InvalidProfile("need initial_cases >= 1")
    if days <= si.max_lag:
        raise InvalidProfile("need days > serial-interval max lag")
    r = np.asarray(profile, dtype=float)
    if r.size < days:
        raise InvalidProfile("profile shorter than simulation length")
    w = np.asarray(si.pmf)
    lags = si.max_lag
    n = np.zeros(days)
    n[0] = float(initial_cases)
    for t in range(1, days):
        lo = max(0, t - lags)
        past = n[lo:t][::-1]  # most recent first, aligned with w(1..)
        lam = r[t] * float(np.dot(past, w[: t - lo]))
        n[t] = lam if rng is None else float(rng.poisson(lam))
    return n


def make_scenario(
    sc: Scenario, si: SerialInterval
) -> tuple[list[IncidenceSeries], list[UnitGeometry], Partition]:
    """Simulate every cell and return series, unit-square geometry, truth."""
    _check_regions_connected(sc)
    cal = Calendar(SCENARIO_START, sc.days)
    series = []
    geoms = []
    cells = []
    for row in range(sc.rows):
        for col in range(sc.cols):
            uid = UnitId(cell_id(row, col))
            label = sc.region_grid[row][col]
            profile = expand_profile(sc.profiles[label], sc.days)
            rng = substream_rng(sc.rng_seed, uid.id) if sc.mode == "poisson" else None
            counts = simulate_renewal(profile, si, sc.initial_cases, sc.days, rng)
            series.append(IncidenceSeries(uid, cal, tuple(float(c) for c in counts)))
            x, y = float(col), float(row)
            ring = ((x, y), (x + 1, y), (x + 1, y + 1), (x, y + 1), (x, y))
            geoms.append(UnitGeometry(uid, (x + 0.5, y + 0.5), (ring,)))
            cells.append((uid, label))

    cells.sort(key=lambda c: c[0].id)
    label_order: dict[str, int] = {}
    for _, label in cells:
        if label not in label_order:
            label_order[label] = len(label_order) + 1
    k = len(label_order)
    truth = Partition(
        units=tuple(u for u, _ in cells),
        labels=tuple(label_order[label] for _, label in cells),
        k=k,
        objective=0.0,
        cluster_costs=tuple(0.0 for _ in range(k)),
        removed_edges=(),
    )
    return series, geoms, truth


def _check_regions_connected(sc: Scenario) -> None:
    # rook adjacency on the lattice, per region label
    by_label: dict[str, set[tuple[int, int]]] = {}
    for r in range(sc.rows):
        for c in range(sc.cols):
            by_label.setdefault(sc.region_grid[r][c], set()).add((r, c))
    for label, cells in by_label.items():
        start = next(iter(cells))
        seen = {start}
        stack = [start]
        while stack:
            r, c = stack.pop()
            for nb in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
                if nb in cells and nb not in seen:
                    seen.add(nb)
                    stack.append(nb)
        if seen != cells:
            raise DisconnectedRegion(f"region {label!r} is not rook-connected")


def adjusted_rand_index(p: Partition, truth: Partition) -> float:
    """Chance-corrected pair-counting agreement between two partitions."""
    ids_p = [u.id for u in p.units]
    ids_t = [u.id for u in truth.units]
    if sorted(ids_p) != sorted(ids_t):
        raise UnitMismatch("partitions cover different unit sets")
    label_t = dict(zip(ids_t, truth.labels))
    a = np.asarray(p.labels)
    b = np.asarray([label_t[u] for u in ids_p])

    def comb2(x):
        return x * (x - 1) / 2.0

    labels_a = np.unique(a)
    labels_b = np.unique(b)
    table = np.array(
        [[np.sum((a == la) & (b == lb)) for lb in labels_b] for la in labels_a],
        dtype=float,
    )
    index = comb2(table).sum()
    row = comb2(table.sum(axis=1)).sum()
    col = comb2(table.sum(axis=0)).sum()
    total = comb2(float(len(ids_p)))
    expected = row * col / total
    max_index = (row + col) / 2.0
    if max_index == expected:  # both partitions trivial
        return 1.0
    return float((index - expected) / (max_index - expected))


# ----------------------------------------------------------------------
# Scenario JSON (External Interface)
# ----------------------------------------------------------------------

def scenario_from_json(path) -> Scenario:
    """Load a scenario file; see docs/scenario schema in the README."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    try:
        profiles = {
            str(label): tuple((float(seg["r"]), int(seg["days"])) for seg in segs)
            for label, segs in doc["profiles"].items()
        }
        return Scenario(
            rows=int(doc["rows"]),
            cols=int(doc["cols"]),
            region_grid=tuple(tuple(str(c) for c in row) for row in doc["regions"]),
            profiles=profiles,
            initial_cases=float(doc.get("initial_cases", 10)),
            days=int(doc["days"]),
            rng_seed=int(doc.get("rng_seed", 0)),
            mode=str(doc.get("mode", "poisson")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise InvalidProfile(f"bad scenario file: {exc}")
