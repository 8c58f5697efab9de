"""Spatial proximity graphs over analysis units and their DTW-weighted MST.

Three graph sources: queen contiguity from polygons, Gabriel graphs from
centroids, and k-nearest-neighbours as an explicit override. Disconnected
graphs (islands) are repaired by bridging the closest component pair on
centroid distance. The MST is taken over the proximity edges with DTW
distances as weights, with lexicographic tie-breaking so the tree is
unique.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import UnitGeometry, UnitId
from .dtwdist import DistanceMatrix
from .errors import Disconnected, DuplicateCentroid, MissingPolygon

QUEEN_TOLERANCE = 1e-6  # CRS units; boundaries closer than this touch


@dataclass(frozen=True)
class SpatialGraph:
    """Undirected simple graph over units; edges are (i, j) with i < j."""

    units: tuple[UnitId, ...]
    edges: tuple[tuple[int, int], ...]
    provenance: tuple[str, ...]  # per edge: contiguity | gabriel | knn | bridge

    def __post_init__(self):
        if len(self.edges) != len(self.provenance):
            raise ValueError("one provenance tag per edge required")
        seen = set()
        for i, j in self.edges:
            if i == j:
                raise ValueError("self-loop")
            if (i, j) in seen or i > j:
                raise ValueError("edges must be unique with i < j")
            seen.add((i, j))

    @property
    def n(self) -> int:
        return len(self.units)

    def adjacency(self) -> list[list[int]]:
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        return adj

    def components(self) -> list[list[int]]:
        adj = self.adjacency()
        seen = [False] * self.n
        comps = []
        for start in range(self.n):
            if seen[start]:
                continue
            stack = [start]
            seen[start] = True
            comp = []
            while stack:
                v = stack.pop()
                comp.append(v)
                for w in adj[v]:
                    if not seen[w]:
                        seen[w] = True
                        stack.append(w)
            comps.append(sorted(comp))
        return comps


@dataclass(frozen=True)
class SpanningTree:
    graph: SpatialGraph
    edges: tuple[tuple[int, int], ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        if len(self.edges) != self.graph.n - 1:
            raise ValueError("spanning tree must have n-1 edges")
        graph_edges = set(self.graph.edges)
        for e in self.edges:
            if e not in graph_edges:
                raise ValueError(f"tree edge {e} not in parent graph")

    @property
    def total_weight(self) -> float:
        return float(sum(self.weights))


def _sorted_geoms(geoms: Sequence[UnitGeometry]) -> list[UnitGeometry]:
    return sorted(geoms, key=lambda g: g.unit.id)


def build_contiguity(
    geoms: Sequence[UnitGeometry], tolerance: float = QUEEN_TOLERANCE
) -> SpatialGraph:
    """Queen contiguity: edge iff polygon boundaries come within `tolerance`."""
    from shapely.geometry import MultiPolygon, Polygon

    ordered = _sorted_geoms(geoms)
    polys = []
    for g in ordered:
        if g.polygon is None:
            raise MissingPolygon(g.unit.id)
        parts = [Polygon(ring) for ring in g.polygon]
        polys.append(parts[0] if len(parts) == 1 else MultiPolygon([(p.exterior.coords, []) for p in parts]))
    bounds = [p.bounds for p in polys]

    edges = []
    n = len(ordered)
    for i in range(n):
        bi = bounds[i]
        for j in range(i + 1, n):
            bj = bounds[j]
            if (
                bi[0] > bj[2] + tolerance
                or bj[0] > bi[2] + tolerance
                or bi[1] > bj[3] + tolerance
                or bj[1] > bi[3] + tolerance
            ):
                continue
            if polys[i].distance(polys[j]) <= tolerance:
                edges.append((i, j))
    return SpatialGraph(
        tuple(g.unit for g in ordered), tuple(edges), tuple("contiguity" for _ in edges)
    )


def build_gabriel(geoms: Sequence[UnitGeometry]) -> SpatialGraph:
    """Gabriel graph: edge (i, j) iff no third centroid lies strictly
    inside the disk whose diameter is the segment ij."""
    ordered = _sorted_geoms(geoms)
    pts = np.array([g.centroid for g in ordered], dtype=float)
    n = len(ordered)
    if n < 2:
        raise ValueError("need at least 2 units")
    for i in range(n):
        for j in range(i + 1, n):
            if pts[i, 0] == pts[j, 0] and pts[i, 1] == pts[j, 1]:
                raise DuplicateCentroid(
                    f"{ordered[i].unit.id!r} and {ordered[j].unit.id!r}"
                )

    edges = []
    for i in range(n):
        for j in range(i + 1, n):
            mid = (pts[i] + pts[j]) / 2.0
            r2 = float(np.sum((pts[i] - pts[j]) ** 2)) / 4.0
            dist2 = np.sum((pts - mid) ** 2, axis=1)
            dist2[i] = np.inf
            dist2[j] = np.inf
            if float(dist2.min()) >= r2:
                edges.append((i, j))
    return SpatialGraph(
        tuple(g.unit for g in ordered), tuple(edges), tuple("gabriel" for _ in edges)
    )


def build_knn(geoms: Sequence[UnitGeometry], k: int) -> SpatialGraph:
    """Symmetrized k-nearest-neighbour graph on centroids."""
    ordered = _sorted_geoms(geoms)
    pts = np.array([g.centroid for g in ordered], dtype=float)
    n = len(ordered)
    if not 1 <= k < n:
        raise ValueError(f"need 1 <= k < n, got k={k}, n={n}")
    edges = set()
    for i in range(n):
        dist2 = np.sum((pts - pts[i]) ** 2, axis=1)
        dist2[i] = np.inf
        # stable under distance ties: order by (distance, index)
        order = sorted(range(n), key=lambda j: (dist2[j], j))
        for j in order[:k]:
            edges.add((min(i, j), max(i, j)))
    out = sorted(edges)
    return SpatialGraph(
        tuple(g.unit for g in ordered), tuple(out), tuple("knn" for _ in out)
    )


def ensure_connected(g: SpatialGraph, geoms: Sequence[UnitGeometry]) -> SpatialGraph:
    """Bridge components with shortest centroid-distance edges until connected.

    Adds exactly components-1 edges; ties resolved by lowest unit-id pair.
    """
    ordered = _sorted_geoms(geoms)
    if tuple(x.unit for x in ordered) != g.units:
        raise ValueError("geometry units do not match graph units")
    pts = np.array([x.centroid for x in ordered], dtype=float)

    edges = list(g.edges)
    prov = list(g.provenance)
    while True:
        comps = SpatialGraph(g.units, tuple(sorted(edges)), tuple("x" for _ in edges)).components()
        if len(comps) <= 1:
            break
        label = [0] * g.n
        for ci, comp in enumerate(comps):
            for v in comp:
                label[v] = ci
        best = None  # (dist, i, j)
        for i in range(g.n):
            for j in range(i + 1, g.n):
                if label[i] == label[j]:
                    continue
                d = float(np.hypot(*(pts[i] - pts[j])))
                cand = (d, i, j)
                if best is None or cand < best:
                    best = cand
        _, i, j = best
        edges.append((i, j))
        prov.append("bridge")

    order = sorted(range(len(edges)), key=lambda idx: edges[idx])
    return SpatialGraph(
        g.units,
        tuple(edges[idx] for idx in order),
        tuple(prov[idx] for idx in order),
    )


def minimum_spanning_tree(g: SpatialGraph, d: DistanceMatrix) -> SpanningTree:
    """Kruskal MST over g's edges weighted by the DTW distance matrix.

    Equal weights break by lexicographic edge id so the tree is unique.
    """
    if tuple(u.id for u in d.units) != tuple(u.id for u in g.units):
        raise ValueError("distance matrix units do not match graph units")
    if len(g.components()) != 1:
        raise Disconnected("graph has more than one component")

    parent = list(range(g.n))

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    ranked = sorted(g.edges, key=lambda e: (d.d[e[0], e[1]], e))
    tree = []
    weights = []
    for i, j in ranked:
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            tree.append((i, j))
            weights.append(float(d.d[i, j]))
            if len(tree) == g.n - 1:
                break
    order = sorted(range(len(tree)), key=lambda idx: tree[idx])
    return SpanningTree(
        g, tuple(tree[idx] for idx in order), tuple(weights[idx] for idx in order)
    )
