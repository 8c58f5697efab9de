import itertools
import random

import numpy as np
import pytest

from epizone.core import UnitId
from epizone.dtwdist import DistanceMatrix
from epizone.errors import EmptyCluster, EmptyFrontier, InfeasibleMinSize, SeedOverlap
from epizone.geograph import SpanningTree, SpatialGraph
from epizone.zoner import (
    admission_test,
    cluster_cost,
    farthest_point_seeds,
    grow_partition,
    skater_partition,
)

from oracles import pair_sum_brute, partition_objective, tree_components


def dmat(d):
    d = np.asarray(d, dtype=float)
    return DistanceMatrix(tuple(UnitId(f"u{i:02d}") for i in range(len(d))), d)


def random_dmat(rng, n):
    d = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            d[i, j] = d[j, i] = rng.uniform(0.1, 5.0)
    return dmat(d)


def random_tree_edges(rng, n):
    edges = []
    for v in range(1, n):
        u = rng.randrange(v)
        edges.append((u, v))
    return sorted(edges)


def make_tree(d, edges):
    n = len(d.units)
    g = SpatialGraph(d.units, tuple(sorted(edges)), tuple("knn" for _ in edges))
    weights = tuple(float(d.d[i, j]) for i, j in sorted(edges))
    return SpanningTree(g, tuple(sorted(edges)), weights)


class TestClusterCost:
    def test_singleton_zero(self):
        d = dmat([[0.0, 1.0], [1.0, 0.0]])
        assert cluster_cost([0], d) == 0.0

    def test_three_units(self):
        d = dmat([[0, 1, 2], [1, 0, 3], [2, 3, 0]])
        # pair sum 6 over size 3
        assert cluster_cost([0, 1, 2], d) == 2.0
        assert cluster_cost([0, 1, 2], d, "mean_pairwise") == 2.0

    def test_empty_rejected(self):
        with pytest.raises(EmptyCluster):
            cluster_cost([], dmat([[0.0]]))

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_double_loop_oracle(self, seed):
        rng = random.Random(seed)
        d = random_dmat(rng, 8)
        members = sorted(rng.sample(range(8), 6))
        want = pair_sum_brute(members, d.d) / len(members)
        assert cluster_cost(members, d) == pytest.approx(want, abs=1e-12)


class TestAdmissionTest:
    def test_single_pair_means(self):
        d = dmat([[0, 1, 5], [1, 0, 9], [5, 9, 0]])
        assert admission_test([0], [1, 2], d) == 1

    def test_singleton_frontier(self):
        d = dmat([[0, 1], [1, 0]])
        assert admission_test([0], [1], d) == 1

    def test_empty_frontier(self):
        with pytest.raises(EmptyFrontier):
            admission_test([0], [], dmat([[0.0]]))

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_exhaustive_mean(self, seed):
        rng = random.Random(seed)
        d = random_dmat(rng, 7)
        cluster = [0, 2, 4]
        frontier = [1, 3, 5]
        got = admission_test(cluster, frontier, d)
        means = {}
        for q in frontier:
            group = cluster + [q]
            means[q] = pair_sum_brute(group, d.d) / (len(group) * (len(group) - 1) / 2)
        best = min(frontier, key=lambda q: (means[q], d.units[q].id))
        assert got == best

    def test_argmin_invariant_under_scaling(self):
        rng = random.Random(3)
        d = random_dmat(rng, 6)
        scaled = DistanceMatrix(d.units, d.d * 17.0)
        assert admission_test([0, 1], [2, 3, 4, 5], d) == admission_test(
            [0, 1], [2, 3, 4, 5], scaled
        )


class TestSkaterPartition:
    def test_k1_identity(self):
        rng = random.Random(1)
        d = random_dmat(rng, 6)
        tree = make_tree(d, random_tree_edges(rng, 6))
        part = skater_partition(tree, d, 1, min_size=1)
        assert set(part.labels) == {1}
        assert part.objective == pytest.approx(cluster_cost(range(6), d))
        assert part.removed_edges == ()

    def test_k_equals_n_all_singletons(self):
        rng = random.Random(2)
        d = random_dmat(rng, 5)
        tree = make_tree(d, random_tree_edges(rng, 5))
        part = skater_partition(tree, d, 5, min_size=1)
        assert sorted(part.labels) == [1, 2, 3, 4, 5]
        assert part.objective == 0.0

    def test_path_middle_edge_removed_first(self):
        # path u0-u1-u2-u3; distances make the middle split dominant
        d = np.array(
            [
                [0.0, 0.1, 9.0, 9.0],
                [0.1, 0.0, 9.0, 9.0],
                [9.0, 9.0, 0.0, 0.1],
                [9.0, 9.0, 0.1, 0.0],
            ]
        )
        dm = dmat(d)
        tree = make_tree(dm, [(0, 1), (1, 2), (2, 3)])
        part = skater_partition(tree, dm, 2, min_size=1)
        assert part.removed_edges == ((1, 2),)
        assert part.labels == (1, 1, 2, 2)
        # greedy matches the exhaustive optimum here by construction
        best = min(
            partition_objective(4, tree.edges, rem, d)
            for rem in itertools.combinations(tree.edges, 1)
        )
        assert part.objective == pytest.approx(best, abs=1e-12)

    def test_min_size_respected(self):
        rng = random.Random(4)
        d = random_dmat(rng, 8)
        tree = make_tree(d, random_tree_edges(rng, 8))
        part = skater_partition(tree, d, 3, min_size=2)
        sizes = [part.labels.count(c) for c in range(1, 4)]
        assert all(s >= 2 for s in sizes)

    def test_infeasible_min_size(self):
        rng = random.Random(5)
        d = random_dmat(rng, 4)
        tree = make_tree(d, random_tree_edges(rng, 4))
        with pytest.raises(InfeasibleMinSize):
            skater_partition(tree, d, 3, min_size=2)

    @pytest.mark.parametrize("seed", range(15))
    def test_contiguity_invariant(self, seed):
        rng = random.Random(seed)
        n = rng.randint(5, 12)
        d = random_dmat(rng, n)
        edges = random_tree_edges(rng, n)
        tree = make_tree(d, edges)
        k = rng.randint(2, min(4, n))
        part = skater_partition(tree, d, k, min_size=1)
        # every cluster is connected within the spanning tree
        comps = tree_components(n, edges, part.removed_edges)
        comp_of = {}
        for ci, comp in enumerate(comps):
            for v in comp:
                comp_of[v] = ci
        for a in range(n):
            for b in range(n):
                if part.labels[a] == part.labels[b]:
                    assert comp_of[a] == comp_of[b]

    @pytest.mark.parametrize("seed", range(10))
    def test_objective_matches_removed_edges(self, seed):
        rng = random.Random(30 + seed)
        n = rng.randint(5, 10)
        d = random_dmat(rng, n)
        edges = random_tree_edges(rng, n)
        tree = make_tree(d, edges)
        part = skater_partition(tree, d, 3, min_size=1)
        want = partition_objective(n, edges, part.removed_edges, d.d)
        assert part.objective == pytest.approx(want, abs=1e-12)

    def test_objective_monotone_in_k(self):
        rng = random.Random(40)
        d = random_dmat(rng, 10)
        edges = random_tree_edges(rng, 10)
        tree = make_tree(d, edges)
        prev = None
        for k in range(1, 6):
            obj = skater_partition(tree, d, k, min_size=1).objective
            if prev is not None:
                assert obj <= prev + 1e-12
            prev = obj

    def test_beats_random_feasible_removals(self):
        rng = random.Random(55)
        n = 20
        d = random_dmat(rng, n)
        edges = random_tree_edges(rng, n)
        tree = make_tree(d, edges)
        part = skater_partition(tree, d, 4, min_size=1)
        for _ in range(1000):
            rem = rng.sample(edges, 3)
            obj = partition_objective(n, edges, rem, d.d)
            assert part.objective <= obj + 1e-9


class TestGrowPartition:
    def test_k_equals_n_identity(self):
        rng = random.Random(1)
        d = random_dmat(rng, 5)
        tree = make_tree(d, random_tree_edges(rng, 5))
        part = grow_partition(tree, d, 5, seeds=list(range(5)))
        assert sorted(part.labels) == [1, 2, 3, 4, 5]

    def test_path_single_comparison(self):
        d = np.array([[0.0, 1.0, 9.0], [1.0, 0.0, 4.0], [9.0, 4.0, 0.0]])
        dm = dmat(d)
        tree = make_tree(dm, [(0, 1), (1, 2)])
        part = grow_partition(tree, dm, 2, seeds=[0, 2])
        # middle unit joins the seed it is closer to
        assert part.labels[1] == part.labels[0]

    def test_seed_overlap(self):
        rng = random.Random(2)
        d = random_dmat(rng, 4)
        tree = make_tree(d, random_tree_edges(rng, 4))
        with pytest.raises(SeedOverlap):
            grow_partition(tree, d, 2, seeds=[1, 1])

    def test_matches_step_by_step_simulation(self):
        rng = random.Random(9)
        n = 6
        d = random_dmat(rng, n)
        edges = random_tree_edges(rng, n)
        tree = make_tree(d, edges)
        seeds = [0, 5]
        part = grow_partition(tree, d, 2, seeds=seeds)

        # independent hand simulation of the round-robin growth
        adj = {v: set() for v in range(n)}
        for a, b in edges:
            adj[a].add(b)
            adj[b].add(a)
        clusters = [[0], [5]]
        assigned = {0: 0, 5: 1}
        while len(assigned) < n:
            for ci in range(2):
                frontier = sorted(
                    w for v in clusters[ci] for w in adj[v] if w not in assigned
                )
                if not frontier:
                    continue
                scores = {}
                for q in frontier:
                    grp = clusters[ci] + [q]
                    scores[q] = pair_sum_brute(sorted(grp), d.d) / (
                        len(grp) * (len(grp) - 1) / 2
                    )
                win = min(frontier, key=lambda q: (scores[q], d.units[q].id))
                clusters[ci].append(win)
                assigned[win] = ci
                if len(assigned) == n:
                    break
        sim_labels = [0] * n
        for ci, members in enumerate(clusters):
            for v in members:
                sim_labels[v] = ci
        got = [part.labels[v] for v in range(n)]
        # same grouping up to label naming
        pairs_sim = {(a, b) for a in range(n) for b in range(n) if sim_labels[a] == sim_labels[b]}
        pairs_got = {(a, b) for a in range(n) for b in range(n) if got[a] == got[b]}
        assert pairs_sim == pairs_got

    def test_contiguity(self):
        rng = random.Random(12)
        n = 10
        d = random_dmat(rng, n)
        edges = random_tree_edges(rng, n)
        tree = make_tree(d, edges)
        part = grow_partition(tree, d, 3)
        comps = tree_components(n, edges, part.removed_edges)
        assert len(comps) == 3
        for comp in comps:
            labels = {part.labels[v] for v in comp}
            assert len(labels) == 1


class TestFarthestPointSeeds:
    def test_first_two_are_the_max_pair(self):
        rng = random.Random(3)
        d = random_dmat(rng, 7)
        seeds = farthest_point_seeds(d, 2)
        i, j = max(
            ((i, j) for i in range(7) for j in range(i + 1, 7)),
            key=lambda p: d.d[p[0], p[1]],
        )
        assert set(seeds) == {i, j}
