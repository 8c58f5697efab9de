"""File ingestion: incidence and mortality CSVs, aggregation maps, geometry.

Also computes the mortality differential (target year minus multi-year
baseline average, by day of year) and aggregates fine units into coarser
analysis units by day-wise summation.

File formats
------------
- incidence CSV:    header ``unit_id,date,count`` (ISO dates, UTF-8)
- mortality CSV:    header ``unit_id,date,deaths`` (multi-year coverage)
- aggregation CSV:  header ``fine_id,coarse_id``
- geometry:         GeoJSON FeatureCollection with property ``unit_id``
                    (Polygon/MultiPolygon, lon/lat), or centroid CSV
                    ``unit_id,x,y[,crs]`` with crs in {planar, lonlat}
"""

from __future__ import annotations

import csv
import datetime as dt
import json
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .core import Calendar, IncidenceSeries, UnitGeometry, UnitId, align_to_calendar
from .errors import (
    DuplicateRecord,
    EmptyBaseline,
    InvalidRing,
    MissingTargetYear,
    MissingUnitProperty,
    NegativeCount,
    ParseError,
    UnmappedUnit,
)

EARTH_RADIUS_M = 6_371_000.0


@dataclass(frozen=True)
class MortalityPanel:
    """Per-year daily death counts for one unit (baseline years + target)."""

    unit: UnitId
    by_year: dict[int, tuple[tuple[dt.date, float], ...]]


@dataclass(frozen=True)
class AggregationMap:
    """Total map from fine unit ids to coarse unit ids."""

    entries: dict[str, str]

    def coarse_ids(self) -> list[str]:
        return sorted(set(self.entries.values()))


# ----------------------------------------------------------------------
# CSV parsing
# ----------------------------------------------------------------------

def _parse_date(text: str, line: int) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise ParseError(line, f"bad date {text!r}")


def _parse_count(text: str, line: int) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ParseError(line, f"bad count {text!r}")
    if not math.isfinite(v):
        raise ParseError(line, f"non-finite count {text!r}")
    return v


def parse_incidence_csv(path) -> list[IncidenceSeries]:
    """Read a ``unit_id,date,count`` file into per-unit series.

    All units are placed on one shared calendar spanning the earliest to
    the latest date in the file; unit-days without a row are imputed 0
    and flagged.
    """
    records: dict[str, dict[dt.date, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["unit_id", "date", "count"]:
            raise ParseError(1, "expected header unit_id,date,count")
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 3:
                raise ParseError(line, "expected 3 columns")
            uid = row[0].strip()
            if not uid:
                raise ParseError(line, "empty unit_id")
            d = _parse_date(row[1], line)
            v = _parse_count(row[2], line)
            if v < 0:
                raise NegativeCount(uid, d)
            per_unit = records.setdefault(uid, {})
            if d in per_unit:
                raise DuplicateRecord(uid, d)
            per_unit[d] = v
    if not records:
        raise ParseError(1, "no data rows")

    all_dates = [d for obs in records.values() for d in obs]
    start, end = min(all_dates), max(all_dates)
    cal = Calendar(start, (end - start).days + 1)
    out = []
    for uid in sorted(records):
        out.append(align_to_calendar(records[uid].items(), cal, UnitId(uid)))
    return out


def parse_mortality_csv(path) -> list[MortalityPanel]:
    """Read a ``unit_id,date,deaths`` file into per-unit, per-year panels."""
    records: dict[str, dict[dt.date, float]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["unit_id", "date", "deaths"]:
            raise ParseError(1, "expected header unit_id,date,deaths")
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 3:
                raise ParseError(line, "expected 3 columns")
            uid = row[0].strip()
            if not uid:
                raise ParseError(line, "empty unit_id")
            d = _parse_date(row[1], line)
            v = _parse_count(row[2], line)
            if v < 0:
                raise NegativeCount(uid, d)
            per_unit = records.setdefault(uid, {})
            if d in per_unit:
                raise DuplicateRecord(uid, d)
            per_unit[d] = v

    panels = []
    for uid in sorted(records):
        by_year: dict[int, list[tuple[dt.date, float]]] = {}
        for d in sorted(records[uid]):
            by_year.setdefault(d.year, []).append((d, records[uid][d]))
        panels.append(
            MortalityPanel(UnitId(uid), {y: tuple(rows) for y, rows in by_year.items()})
        )
    return panels


def parse_aggregation_csv(path) -> AggregationMap:
    entries: dict[str, str] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["fine_id", "coarse_id"]:
            raise ParseError(1, "expected header fine_id,coarse_id")
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 2:
                raise ParseError(line, "expected 2 columns")
            fine, coarse = row[0].strip(), row[1].strip()
            if not fine or not coarse:
                raise ParseError(line, "empty id")
            if fine in entries:
                raise ParseError(line, f"fine unit {fine!r} mapped twice")
            entries[fine] = coarse
    return AggregationMap(entries)


# ----------------------------------------------------------------------
# Excess mortality
# ----------------------------------------------------------------------

def compute_excess(
    panel: MortalityPanel, target_year: int
) -> tuple[list[float], IncidenceSeries]:
    """Daily mortality differential vs. the baseline-year average.

    For each day of year d present in the target year:
    raw[d] = target deaths on d minus the mean of the baseline years'
    deaths on d. Feb 29 rows are dropped before alignment, so the series
    axis has at most 365 slots per year. Returns (raw, floored) where
    floored clamps negatives to 0; only the floored series feeds R(t).
    """
    if target_year not in panel.by_year:
        raise MissingTargetYear(f"year {target_year} absent for unit {panel.unit.id!r}")
    baseline_years = sorted(y for y in panel.by_year if y != target_year)
    if not baseline_years:
        raise EmptyBaseline(f"no baseline years for unit {panel.unit.id!r}")

    baseline: dict[tuple[int, int], list[float]] = {}
    for y in baseline_years:
        for d, v in panel.by_year[y]:
            if d.month == 2 and d.day == 29:
                continue
            baseline.setdefault((d.month, d.day), []).append(v)

    target_rows = [
        (d, v) for d, v in sorted(panel.by_year[target_year])
        if not (d.month == 2 and d.day == 29)
    ]
    if not target_rows:
        raise MissingTargetYear(f"target year {target_year} has no usable rows")

    raw: list[float] = []
    for d, v in target_rows:
        base = baseline.get((d.month, d.day))
        if not base:
            raise EmptyBaseline(f"no baseline coverage for day {d.month:02d}-{d.day:02d}")
        raw.append(v - sum(base) / len(base))

    # Calendar indexes the retained day-of-year slots; in a leap target
    # year the civil labels after Feb 28 shift back one day.
    cal = Calendar(target_rows[0][0], len(target_rows))
    floored = IncidenceSeries(panel.unit, cal, tuple(max(x, 0.0) for x in raw))
    return raw, floored


def aggregate(
    series: Sequence[IncidenceSeries], mapping: AggregationMap
) -> list[IncidenceSeries]:
    """Sum fine-unit series day-wise into coarse units; calendar preserved."""
    if not series:
        return []
    cal = series[0].calendar
    groups: dict[str, list[IncidenceSeries]] = {}
    for s in series:
        coarse = mapping.entries.get(s.unit.id)
        if coarse is None:
            raise UnmappedUnit(s.unit.id)
        groups.setdefault(coarse, []).append(s)

    out = []
    for coarse in sorted(groups):
        members = groups[coarse]
        counts = [0.0] * cal.length
        for s in members:
            for i, c in enumerate(s.counts):
                counts[i] += c
        out.append(IncidenceSeries(UnitId(coarse), cal, tuple(counts)))
    return out


def aggregate_mortality(
    panels: Sequence[MortalityPanel], mapping: AggregationMap
) -> list[MortalityPanel]:
    """Sum fine-unit mortality panels date-wise into coarse units."""
    groups: dict[str, dict[dt.date, float]] = {}
    for p in panels:
        coarse = mapping.entries.get(p.unit.id)
        if coarse is None:
            raise UnmappedUnit(p.unit.id)
        acc = groups.setdefault(coarse, {})
        for rows in p.by_year.values():
            for d, v in rows:
                acc[d] = acc.get(d, 0.0) + v

    out = []
    for coarse in sorted(groups):
        by_year: dict[int, list[tuple[dt.date, float]]] = {}
        for d in sorted(groups[coarse]):
            by_year.setdefault(d.year, []).append((d, groups[coarse][d]))
        out.append(
            MortalityPanel(UnitId(coarse), {y: tuple(r) for y, r in by_year.items()})
        )
    return out


# ----------------------------------------------------------------------
# Geometry
# ----------------------------------------------------------------------

def equirectangular(
    points: Sequence[tuple[float, float]], ref_lat_deg: float
) -> list[tuple[float, float]]:
    """Project lon/lat degrees onto a planar CRS in meters.

    x = R * lon_rad * cos(ref_lat), y = R * lat_rad, R = 6,371,000 m.
    Adequate at country scale for proximity graphs.
    """
    c = math.cos(math.radians(ref_lat_deg))
    out = []
    for lon, lat in points:
        out.append(
            (EARTH_RADIUS_M * math.radians(lon) * c, EARTH_RADIUS_M * math.radians(lat))
        )
    return out


def ring_area_centroid(ring: Sequence[tuple[float, float]]) -> tuple[float, tuple[float, float]]:
    """Signed shoelace area and area-weighted centroid of a closed ring."""
    a2 = 0.0
    cx = 0.0
    cy = 0.0
    for (x0, y0), (x1, y1) in zip(ring, ring[1:]):
        cross = x0 * y1 - x1 * y0
        a2 += cross
        cx += (x0 + x1) * cross
        cy += (y0 + y1) * cross
    if abs(a2) < 1e-300:
        xs = [p[0] for p in ring[:-1]]
        ys = [p[1] for p in ring[:-1]]
        return 0.0, (sum(xs) / len(xs), sum(ys) / len(ys))
    return a2 / 2.0, (cx / (3.0 * a2), cy / (3.0 * a2))


def polygon_centroid(rings: Sequence[Sequence[tuple[float, float]]]) -> tuple[float, float]:
    """Area-weighted centroid over the exterior rings of all parts."""
    total = 0.0
    cx = 0.0
    cy = 0.0
    for ring in rings:
        a, (x, y) = ring_area_centroid(ring)
        w = abs(a)
        total += w
        cx += w * x
        cy += w * y
    if total == 0.0:
        pts = [p for ring in rings for p in ring[:-1]]
        return (sum(p[0] for p in pts) / len(pts), sum(p[1] for p in pts) / len(pts))
    return cx / total, cy / total


def _check_ring(ring, uid: str) -> tuple[tuple[float, float], ...]:
    pts = tuple((float(x), float(y)) for x, y in ring)
    if len(pts) < 4:
        raise InvalidRing(f"ring with fewer than 4 points for unit {uid!r}")
    if pts[0] != pts[-1]:
        raise InvalidRing(f"unclosed ring for unit {uid!r}")
    try:
        from shapely.geometry import Polygon

        if not Polygon(pts).is_valid:
            raise InvalidRing(f"self-intersecting ring for unit {uid!r}")
    except ImportError:  # pragma: no cover
        pass
    return pts


def parse_geometry(path) -> list[UnitGeometry]:
    """Read a GeoJSON feature collection or a centroid CSV.

    GeoJSON coordinates are treated as lon/lat and projected; centroid
    CSVs are projected only for rows tagged crs=lonlat. Holes in polygon
    parts are ignored (irrelevant for contiguity and centroids here).
    """
    with open(path, encoding="utf-8") as fh:
        head = fh.read(64)
    if head.lstrip().startswith("{"):
        return _parse_geojson(path)
    return _parse_centroid_csv(path)


def _parse_geojson(path) -> list[UnitGeometry]:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    feats = doc.get("features")
    if not isinstance(feats, list):
        raise ParseError(1, "not a FeatureCollection")

    raw: list[tuple[str, list[tuple[tuple[float, float], ...]]]] = []
    for feat in feats:
        props = feat.get("properties") or {}
        uid = props.get("unit_id")
        if uid in (None, ""):
            raise MissingUnitProperty("feature without unit_id property")
        uid = str(uid)
        geom = feat.get("geometry") or {}
        gtype = geom.get("type")
        coords = geom.get("coordinates")
        if gtype == "Polygon":
            parts = [coords]
        elif gtype == "MultiPolygon":
            parts = coords
        else:
            raise ParseError(1, f"unsupported geometry type {gtype!r} for {uid!r}")
        rings = [_check_ring(part[0], uid) for part in parts]
        raw.append((uid, rings))

    # project everything about the dataset's mean latitude
    lats = [p[1] for _, rings in raw for ring in rings for p in ring[:-1]]
    ref_lat = sum(lats) / len(lats)
    out = []
    for uid, rings in raw:
        proj_rings = tuple(tuple(equirectangular(ring, ref_lat)) for ring in rings)
        out.append(
            UnitGeometry(UnitId(uid), polygon_centroid(proj_rings), proj_rings)
        )
    return out


def _parse_centroid_csv(path) -> list[UnitGeometry]:
    rows: list[tuple[str, float, float, str]] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:3]] != ["unit_id", "x", "y"]:
            raise ParseError(1, "expected header unit_id,x,y[,crs]")
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < 3:
                raise ParseError(line, "expected at least 3 columns")
            uid = row[0].strip()
            if not uid:
                raise MissingUnitProperty(f"empty unit_id at line {line}")
            try:
                x, y = float(row[1]), float(row[2])
            except ValueError:
                raise ParseError(line, "bad coordinate")
            crs = row[3].strip() if len(row) > 3 and row[3].strip() else "planar"
            if crs not in ("planar", "lonlat"):
                raise ParseError(line, f"unknown crs {crs!r}")
            rows.append((uid, x, y, crs))
    if not rows:
        raise ParseError(1, "no data rows")

    lonlat = [(x, y) for _, x, y, crs in rows if crs == "lonlat"]
    ref_lat = sum(p[1] for p in lonlat) / len(lonlat) if lonlat else 0.0
    out = []
    for uid, x, y, crs in rows:
        if crs == "lonlat":
            (x, y), = equirectangular([(x, y)], ref_lat)
        out.append(UnitGeometry(UnitId(uid), (x, y)))
    return out
