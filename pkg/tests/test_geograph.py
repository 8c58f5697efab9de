import itertools
import random

import numpy as np
import pytest

from epizone.core import UnitGeometry, UnitId
from epizone.dtwdist import DistanceMatrix
from epizone.errors import Disconnected, DuplicateCentroid, MissingPolygon
from epizone.geograph import (
    SpatialGraph,
    build_contiguity,
    build_gabriel,
    build_knn,
    ensure_connected,
    minimum_spanning_tree,
)

from oracles import euclidean_mst_edges, gabriel_brute, spanning_trees_min_weight


def square(uid, x, y, size=1.0):
    ring = (
        (x, y), (x + size, y), (x + size, y + size), (x, y + size), (x, y),
    )
    return UnitGeometry(UnitId(uid), (x + size / 2, y + size / 2), (ring,))


def point(uid, x, y):
    return UnitGeometry(UnitId(uid), (float(x), float(y)))


def dmat_for(units, weights):
    n = len(units)
    d = np.zeros((n, n))
    for (i, j), w in weights.items():
        d[i, j] = d[j, i] = w
    return DistanceMatrix(tuple(UnitId(u) for u in units), d)


class TestContiguity:
    def test_shared_edge(self):
        g = build_contiguity([square("a", 0, 0), square("b", 1, 0)])
        assert g.edges == ((0, 1),)
        assert g.provenance == ("contiguity",)

    def test_corner_touch_is_queen_edge(self):
        g = build_contiguity([square("a", 0, 0), square("b", 1, 1)])
        assert g.edges == ((0, 1),)

    def test_disjoint(self):
        g = build_contiguity([square("a", 0, 0), square("b", 10, 0)])
        assert g.edges == ()

    def test_missing_polygon(self):
        with pytest.raises(MissingPolygon):
            build_contiguity([square("a", 0, 0), point("b", 5, 5)])

    def test_lattice_queen_degree(self):
        geoms = [square(f"r{r}c{c}", c, r) for r in range(3) for c in range(3)]
        g = build_contiguity(geoms)
        # 3x3 queen lattice: 12 rook + 8 diagonal edges
        assert len(g.edges) == 20


class TestGabriel:
    def test_two_points(self):
        g = build_gabriel([point("a", 0, 0), point("b", 1, 0)])
        assert g.edges == ((0, 1),)

    def test_collinear(self):
        g = build_gabriel([point("a", 0, 0), point("b", 1, 0), point("c", 2, 0)])
        assert g.edges == ((0, 1), (1, 2))

    def test_duplicate_centroid(self):
        with pytest.raises(DuplicateCentroid):
            build_gabriel([point("a", 1, 1), point("b", 1, 1)])

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_brute_force(self, seed):
        rng = random.Random(seed)
        pts = [(rng.uniform(0, 10), rng.uniform(0, 10)) for _ in range(10)]
        geoms = [point(f"u{i:02d}", x, y) for i, (x, y) in enumerate(pts)]
        g = build_gabriel(geoms)
        assert set(g.edges) == gabriel_brute(pts)

    @pytest.mark.parametrize("seed", range(10))
    def test_contains_euclidean_mst(self, seed):
        rng = random.Random(50 + seed)
        pts = [(rng.uniform(0, 10), rng.uniform(0, 10)) for _ in range(12)]
        geoms = [point(f"u{i:02d}", x, y) for i, (x, y) in enumerate(pts)]
        g = build_gabriel(geoms)
        assert euclidean_mst_edges(pts) <= set(g.edges)


class TestKnn:
    def test_symmetrized(self):
        geoms = [point("a", 0, 0), point("b", 1, 0), point("c", 5, 0)]
        g = build_knn(geoms, 1)
        # c's nearest is b, so (b, c) exists even though b prefers a
        assert (1, 2) in g.edges


class TestEnsureConnected:
    def test_connected_unchanged(self):
        geoms = [point("a", 0, 0), point("b", 1, 0)]
        g = build_gabriel(geoms)
        assert ensure_connected(g, geoms).edges == g.edges

    def test_two_components_single_bridge(self):
        geoms = [square("a", 0, 0), square("b", 1, 0), square("c", 10, 0), square("d", 11, 0)]
        g = build_contiguity(geoms)
        fixed = ensure_connected(g, geoms)
        added = [e for e, p in zip(fixed.edges, fixed.provenance) if p == "bridge"]
        assert added == [(1, 2)]  # b-c are the closest cross pair

    def test_three_singletons_on_a_line(self):
        geoms = [point("a", 0, 0), point("b", 1, 0), point("c", 3, 0)]
        g = SpatialGraph(tuple(x.unit for x in geoms), (), ())
        fixed = ensure_connected(g, geoms)
        assert fixed.edges == ((0, 1), (1, 2))
        assert fixed.provenance == ("bridge", "bridge")

    def test_adds_minimum_number_of_edges(self):
        rng = random.Random(6)
        geoms = [point(f"u{i:02d}", rng.uniform(0, 10), rng.uniform(0, 10)) for i in range(9)]
        g = SpatialGraph(tuple(x.unit for x in geoms), ((0, 1), (2, 3), (4, 5)), ("knn",) * 3)
        fixed = ensure_connected(g, geoms)
        assert len(fixed.components()) == 1
        assert sum(1 for p in fixed.provenance if p == "bridge") == 6 - 1


class TestMst:
    def test_triangle(self):
        units = ["a", "b", "c"]
        d = dmat_for(units, {(0, 1): 1.0, (0, 2): 2.0, (1, 2): 3.0})
        g = SpatialGraph(d.units, ((0, 1), (0, 2), (1, 2)), ("gabriel",) * 3)
        tree = minimum_spanning_tree(g, d)
        assert set(tree.edges) == {(0, 1), (0, 2)}
        assert tree.total_weight == 3.0

    def test_path_graph_is_its_own_tree(self):
        units = ["a", "b", "c", "d"]
        d = dmat_for(units, {(0, 1): 5.0, (1, 2): 1.0, (2, 3): 9.0})
        g = SpatialGraph(d.units, ((0, 1), (1, 2), (2, 3)), ("knn",) * 3)
        tree = minimum_spanning_tree(g, d)
        assert tree.edges == g.edges

    def test_disconnected_rejected(self):
        units = ["a", "b", "c"]
        d = dmat_for(units, {(0, 1): 1.0})
        g = SpatialGraph(d.units, ((0, 1),), ("knn",))
        with pytest.raises(Disconnected):
            minimum_spanning_tree(g, d)

    @pytest.mark.parametrize("seed", range(15))
    def test_matches_enumeration_oracle(self, seed):
        rng = random.Random(seed)
        n = rng.randint(3, 7)
        units = [f"u{i}" for i in range(n)]
        all_pairs = list(itertools.combinations(range(n), 2))
        edges = [e for e in all_pairs if rng.random() < 0.6]
        # keep connected: add a random spanning path
        order = list(range(n))
        rng.shuffle(order)
        for a, b in zip(order, order[1:]):
            e = (min(a, b), max(a, b))
            if e not in edges:
                edges.append(e)
        edges = sorted(edges)
        weights = {e: rng.uniform(0.1, 5.0) for e in edges}
        d = dmat_for(units, weights)
        g = SpatialGraph(d.units, tuple(edges), tuple("knn" for _ in edges))
        tree = minimum_spanning_tree(g, d)
        want = spanning_trees_min_weight(n, edges, [weights[e] for e in edges])
        assert tree.total_weight == pytest.approx(want, abs=1e-12)

    def test_beats_random_spanning_trees(self):
        rng = random.Random(77)
        n = 10
        units = [f"u{i}" for i in range(n)]
        edges = sorted(itertools.combinations(range(n), 2))
        weights = {e: rng.uniform(0.1, 5.0) for e in edges}
        d = dmat_for(units, weights)
        g = SpatialGraph(d.units, tuple(edges), tuple("knn" for _ in edges))
        tree = minimum_spanning_tree(g, d)
        for _ in range(200):
            # random spanning tree by randomized Kruskal
            shuffled = edges[:]
            rng.shuffle(shuffled)
            parent = list(range(n))

            def find(v):
                while parent[v] != v:
                    v = parent[v]
                return v

            total = 0.0
            count = 0
            for a, b in shuffled:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[ra] = rb
                    total += weights[(a, b)]
                    count += 1
            assert count == n - 1
            assert tree.total_weight <= total + 1e-12

    def test_removing_any_tree_edge_splits_in_two(self):
        rng = random.Random(21)
        n = 8
        units = [f"u{i}" for i in range(n)]
        edges = sorted(itertools.combinations(range(n), 2))
        weights = {e: rng.uniform(0.1, 5.0) for e in edges}
        d = dmat_for(units, weights)
        g = SpatialGraph(d.units, tuple(edges), tuple("knn" for _ in edges))
        tree = minimum_spanning_tree(g, d)
        for drop in tree.edges:
            kept = [e for e in tree.edges if e != drop]
            sub = SpatialGraph(d.units, tuple(kept), tuple("knn" for _ in kept))
            assert len(sub.components()) == 2

    def test_deterministic_under_ties(self):
        units = ["a", "b", "c"]
        d = dmat_for(units, {(0, 1): 1.0, (0, 2): 1.0, (1, 2): 1.0})
        g = SpatialGraph(d.units, ((0, 1), (0, 2), (1, 2)), ("gabriel",) * 3)
        tree = minimum_spanning_tree(g, d)
        assert tree.edges == ((0, 1), (0, 2))
