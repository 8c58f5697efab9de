"""Delimited outputs, JSON reports, and SVG figures for pipeline runs.

All writers are deterministic: fixed column orders, fixed float formats
(9 significant digits for distances), sorted JSON keys, and SVG rendering
with a pinned hash salt and no embedded timestamps, so identical runs
produce byte-identical artifacts.
"""

from __future__ import annotations

import csv
import datetime as dt
import json
from typing import Optional, Sequence

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt
from matplotlib.collections import PolyCollection

from .core import Calendar, IncidenceSeries, UnitGeometry, UnitId
from .dtwdist import DistanceMatrix
from .errors import ParseError
from .geograph import SpanningTree, SpatialGraph
from .repro import RtSeries
from .zoner import Partition

# fixed categorical cycle keyed by (cluster label - 1) % 12
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#aec7e8", "#ffbb78",
)

plt.rcParams["svg.hashsalt"] = "epizone"


def cluster_color(label: int) -> str:
    return PALETTE[(label - 1) % len(PALETTE)]


# ----------------------------------------------------------------------
# delimited writers
# ----------------------------------------------------------------------

def write_incidence_csv(path, series: Sequence[IncidenceSeries]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["unit_id", "date", "count"])
        for s in sorted(series, key=lambda s: s.unit.id):
            for d, c in zip(s.calendar.dates(), s.counts):
                w.writerow([s.unit.id, d.isoformat(), f"{c:.9g}"])


def write_rt_csv(path, rts: Sequence[RtSeries]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["unit_id", "date", "rt", "valid"])
        for rt in sorted(rts, key=lambda r: r.unit.id):
            for d, v, ok in zip(rt.calendar.dates(), rt.values, rt.valid):
                w.writerow([rt.unit.id, d.isoformat(), f"{v:.9g}" if ok else "", int(ok)])


def read_rt_csv(path) -> list[RtSeries]:
    rows: dict[str, list[tuple[dt.date, float, bool]]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["unit_id", "date", "rt", "valid"]:
            raise ParseError(1, "expected header unit_id,date,rt,valid")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            uid, date_s, rt_s, valid_s = row[:4]
            ok = valid_s.strip() == "1"
            rows.setdefault(uid, []).append(
                (dt.date.fromisoformat(date_s), float(rt_s) if ok else 0.0, ok)
            )
    out = []
    for uid in sorted(rows):
        recs = sorted(rows[uid])
        cal = Calendar(recs[0][0], len(recs))
        out.append(
            RtSeries(
                UnitId(uid),
                cal,
                tuple(v for _, v, _ in recs),
                tuple(ok for _, _, ok in recs),
            )
        )
    return out


def write_distance_csv(path, dmat: DistanceMatrix) -> None:
    ids = [u.id for u in dmat.units]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["unit_id"] + ids)
        for i, uid in enumerate(ids):
            w.writerow([uid] + [f"{dmat.d[i, j]:.9g}" for j in range(len(ids))])


def read_distance_csv(path) -> DistanceMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[0] != "unit_id":
            raise ParseError(1, "expected unit_id header")
        ids = header[1:]
        d = np.zeros((len(ids), len(ids)))
        for i, row in enumerate(reader):
            if row[0] != ids[i]:
                raise ParseError(i + 2, "row order does not match header")
            d[i, :] = [float(x) for x in row[1 : len(ids) + 1]]
    return DistanceMatrix(tuple(UnitId(u) for u in ids), d)


def write_graph_csv(path, graph: SpatialGraph, dmat: Optional[DistanceMatrix] = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["src_id", "dst_id", "weight", "provenance"])
        for (i, j), prov in zip(graph.edges, graph.provenance):
            weight = f"{dmat.d[i, j]:.9g}" if dmat is not None else ""
            w.writerow([graph.units[i].id, graph.units[j].id, weight, prov])


def read_graph_csv(path, units: Sequence[UnitId]) -> SpatialGraph:
    index = {u.id: i for i, u in enumerate(units)}
    edges = []
    prov = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["src_id", "dst_id", "weight", "provenance"]:
            raise ParseError(1, "expected header src_id,dst_id,weight,provenance")
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                i, j = index[row[0]], index[row[1]]
            except KeyError as exc:
                raise ParseError(line, f"unknown unit {exc}")
            edges.append((min(i, j), max(i, j)))
            prov.append(row[3] or "contiguity")
    order = sorted(range(len(edges)), key=lambda idx: edges[idx])
    return SpatialGraph(
        tuple(units),
        tuple(edges[idx] for idx in order),
        tuple(prov[idx] for idx in order),
    )


def write_tree_csv(path, tree: SpanningTree) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["src_id", "dst_id", "weight", "provenance"])
        for (i, j), wt in zip(tree.edges, tree.weights):
            w.writerow([tree.graph.units[i].id, tree.graph.units[j].id, f"{wt:.9g}", "mst"])


def write_clusters_csv(path, part: Partition) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["unit_id", "cluster"])
        for u, label in zip(part.units, part.labels):
            w.writerow([u.id, label])


def write_excess_csv(path, rows: Sequence[tuple[str, dt.date, float, float]]) -> None:
    """Rows are (unit_id, date, raw_excess, floored)."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["unit_id", "date", "raw_excess", "floored"])
        for uid, d, raw, floored in rows:
            w.writerow([uid, d.isoformat(), f"{raw:.9g}", f"{floored:.9g}"])


def write_report_json(path, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_geojson(path, geoms: Sequence[UnitGeometry]) -> None:
    feats = []
    for g in sorted(geoms, key=lambda g: g.unit.id):
        if g.polygon is None:
            geometry = {"type": "Point", "coordinates": list(g.centroid)}
        elif len(g.polygon) == 1:
            geometry = {
                "type": "Polygon",
                "coordinates": [[list(p) for p in g.polygon[0]]],
            }
        else:
            geometry = {
                "type": "MultiPolygon",
                "coordinates": [[[list(p) for p in ring]] for ring in g.polygon],
            }
        feats.append(
            {
                "type": "Feature",
                "properties": {"unit_id": g.unit.id},
                "geometry": geometry,
            }
        )
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"type": "FeatureCollection", "features": feats}, fh, sort_keys=True)
        fh.write("\n")


# ----------------------------------------------------------------------
# figures
# ----------------------------------------------------------------------

def _save_svg(fig, path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_map(path, geoms: Sequence[UnitGeometry], part: Partition) -> None:
    """Choropleth of cluster membership; scatter when only centroids exist."""
    label_of = part.assignment()
    ordered = sorted(geoms, key=lambda g: g.unit.id)
    fig, ax = plt.subplots(figsize=(7, 7))
    have_polys = all(g.polygon is not None for g in ordered)
    if have_polys:
        verts = []
        colors = []
        for g in ordered:
            for ring in g.polygon:
                verts.append(np.asarray(ring[:-1]))
                colors.append(cluster_color(label_of[g.unit.id]))
        ax.add_collection(
            PolyCollection(verts, facecolors=colors, edgecolors="black", linewidths=0.3)
        )
        ax.autoscale_view()
    else:
        xs = [g.centroid[0] for g in ordered]
        ys = [g.centroid[1] for g in ordered]
        cs = [cluster_color(label_of[g.unit.id]) for g in ordered]
        ax.scatter(xs, ys, c=cs, s=30, edgecolors="black", linewidths=0.3)
    handles = [
        plt.Line2D([], [], marker="s", linestyle="", color=cluster_color(c), label=f"zone {c}")
        for c in range(1, part.k + 1)
    ]
    ax.legend(handles=handles, loc="upper right", fontsize=8)
    ax.set_aspect("equal")
    ax.set_title(f"{len(ordered)} units in {part.k} zones")
    _save_svg(fig, path)


def render_trends(path, rts: Sequence[RtSeries], part: Partition) -> None:
    """Per-cluster mean R(t) over days where at least one member is valid."""
    label_of = part.assignment()
    by_cluster: dict[int, list[RtSeries]] = {}
    for rt in rts:
        by_cluster.setdefault(label_of[rt.unit.id], []).append(rt)

    fig, ax = plt.subplots(figsize=(8, 4.5))
    for label in sorted(by_cluster):
        members = by_cluster[label]
        t_len = members[0].calendar.length
        xs = []
        ys = []
        for t in range(t_len):
            vals = [m.values[t] for m in members if m.valid[t]]
            if vals:
                xs.append(t)
                ys.append(sum(vals) / len(vals))
        ax.plot(xs, ys, color=cluster_color(label), label=f"zone {label}", linewidth=1.5)
    ax.axhline(1.0, color="gray", linewidth=0.8, linestyle="--")
    ax.set_xlabel("day")
    ax.set_ylabel("mean R(t)")
    ax.legend(fontsize=8)
    _save_svg(fig, path)
