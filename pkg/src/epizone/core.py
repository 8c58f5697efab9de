"""Shared domain types: calendars, units, incidence series, geometries.

All types are immutable after construction and safe to share across
threads. The canonical unit ordering (lexicographic by id) is fixed in
`validate_dataset` and reused by every downstream matrix and graph.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .errors import (
    CalendarMismatch,
    DuplicateUnit,
    EmptyOverlap,
    MissingGeometry,
    NegativeCount,
)


@dataclass(frozen=True, order=True)
class Calendar:
    """A shared daily observation window: start date plus length in days."""

    start_date: dt.date
    length: int

    def __post_init__(self):
        if self.length < 1:
            raise ValueError("calendar length must be >= 1")

    def dates(self) -> list[dt.date]:
        return [self.start_date + dt.timedelta(days=i) for i in range(self.length)]

    def index_of(self, d: dt.date) -> Optional[int]:
        """Day index of `d` inside the window, or None if outside."""
        i = (d - self.start_date).days
        return i if 0 <= i < self.length else None


@dataclass(frozen=True, order=True)
class UnitId:
    id: str
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.id:
            raise ValueError("unit id must be nonempty")


@dataclass(frozen=True)
class IncidenceSeries:
    """Daily nonnegative counts (cases or floored excess deaths) for one unit.

    `imputed` marks days whose value was filled with 0 because no
    observation was available; None means nothing was imputed.
    """

    unit: UnitId
    calendar: Calendar
    counts: tuple[float, ...]
    imputed: Optional[tuple[bool, ...]] = None

    def __post_init__(self):
        if len(self.counts) != self.calendar.length:
            raise CalendarMismatch(self.unit.id, "counts length != calendar length")
        for i, c in enumerate(self.counts):
            if not math.isfinite(c) or c < 0:
                raise NegativeCount(self.unit.id, i)
        if self.imputed is not None and len(self.imputed) != self.calendar.length:
            raise CalendarMismatch(self.unit.id, "imputed flags length != calendar length")


@dataclass(frozen=True)
class UnitGeometry:
    """Centroid (planar CRS, meters) and optional polygon rings for one unit.

    `polygon` is a tuple of closed rings; each ring is a tuple of (x, y)
    vertices with first == last. Multi-part units carry one ring per part.
    """

    unit: UnitId
    centroid: tuple[float, float]
    polygon: Optional[tuple[tuple[tuple[float, float], ...], ...]] = None

    def __post_init__(self):
        x, y = self.centroid
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"non-finite centroid for {self.unit.id!r}")


@dataclass(frozen=True)
class ValidatedDataset:
    """Series and geometries on one calendar, in canonical unit order."""

    calendar: Calendar
    units: tuple[UnitId, ...]
    series: tuple[IncidenceSeries, ...]
    geometries: tuple[UnitGeometry, ...]

    @property
    def n(self) -> int:
        return len(self.units)


def validate_dataset(
    series: Sequence[IncidenceSeries], geoms: Sequence[UnitGeometry]
) -> ValidatedDataset:
    """Cross-check series against geometries and fix the unit ordering.

    Raises MissingGeometry, CalendarMismatch, DuplicateUnit, NegativeCount.
    """
    if not series or not geoms:
        raise ValueError("series and geometries must both be nonempty")

    geom_by_id: dict[str, UnitGeometry] = {}
    for g in geoms:
        if g.unit.id in geom_by_id:
            raise DuplicateUnit(g.unit.id)
        geom_by_id[g.unit.id] = g

    seen: set[str] = set()
    cal = series[0].calendar
    for s in series:
        if s.unit.id in seen:
            raise DuplicateUnit(s.unit.id)
        seen.add(s.unit.id)
        if s.calendar != cal:
            raise CalendarMismatch(s.unit.id, f"expected {cal}, got {s.calendar}")
        if s.unit.id not in geom_by_id:
            raise MissingGeometry(s.unit.id)

    ordered = sorted(series, key=lambda s: s.unit.id)
    units = tuple(s.unit for s in ordered)
    return ValidatedDataset(
        calendar=cal,
        units=units,
        series=tuple(ordered),
        geometries=tuple(geom_by_id[u.id] for u in units),
    )


def align_to_calendar(
    observations: Iterable[tuple[dt.date, float]],
    target: Calendar,
    unit: UnitId,
) -> IncidenceSeries:
    """Place dated observations on the target window.

    Days inside the window with no observation become 0 and are flagged
    imputed; observations outside the window are dropped. Raises
    EmptyOverlap when nothing falls inside, NegativeCount on bad values.
    """
    counts = [0.0] * target.length
    imputed = [True] * target.length
    any_inside = False
    for d, v in observations:
        i = target.index_of(d)
        if i is None:
            continue
        if not math.isfinite(v) or v < 0:
            raise NegativeCount(unit.id, d)
        counts[i] = float(v)
        imputed[i] = False
        any_inside = True
    if not any_inside:
        raise EmptyOverlap(unit.id)
    return IncidenceSeries(unit, target, tuple(counts), tuple(imputed))


def series_observations(s: IncidenceSeries) -> list[tuple[dt.date, float]]:
    """Dated observations backing a series, omitting imputed days."""
    out = []
    for i, d in enumerate(s.calendar.dates()):
        if s.imputed is None or not s.imputed[i]:
            out.append((d, s.counts[i]))
    return out
