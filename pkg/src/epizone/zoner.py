"""Spatially constrained clustering by spanning-tree edge removal.

The default mode prunes the DTW-weighted MST greedily: each round removes
the tree edge whose split most reduces the summed cluster cost, keeping
every cluster a connected subtree (hence spatially contiguous). Split
evaluations are cached per subtree, so after a removal only the two new
subtrees are re-evaluated; all other candidate gains are reused. Because
a single greedy pass can lock in a poor first split, the search restarts
from each of the highest-gain first splits and finishes with a
best-improvement pass that swaps one removed edge for another while it
lowers the objective; both stages are deterministic.

Two cost functionals over a cluster C with pairwise distances d:

- ssd_analogue (default): cost(C) = (1/|C|) * sum_{i<j in C} d[i][j],
  the pairwise analogue of within-cluster sum of squares; singletons 0.
- mean_pairwise: cost(C) = mean of d[i][j] over pairs; singletons 0.

An agglomerative growth mode is also provided: clusters grown from seeds
absorb, in round-robin order, the frontier unit whose admission minimizes
the mean pairwise distance of the enlarged cluster.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import UnitId
from .dtwdist import DistanceMatrix
from .errors import (
    EmptyCluster,
    EmptyFrontier,
    InfeasibleMinSize,
    SeedOverlap,
)
from .geograph import SpanningTree


@dataclass(frozen=True)
class Partition:
    """Assignment of every unit to one of k contiguous clusters."""

    units: tuple[UnitId, ...]
    labels: tuple[int, ...]  # cluster label 1..k per unit
    k: int
    objective: float
    cluster_costs: tuple[float, ...]  # cost per cluster label, index label-1
    removed_edges: tuple[tuple[int, int], ...]

    def assignment(self) -> dict[str, int]:
        return {u.id: c for u, c in zip(self.units, self.labels)}

    def members(self, label: int) -> list[int]:
        return [i for i, c in enumerate(self.labels) if c == label]


def cluster_cost(
    members: Sequence[int], d: DistanceMatrix, objective: str = "ssd_analogue"
) -> float:
    """Cost of one cluster given member indices into the distance matrix."""
    if len(members) == 0:
        raise EmptyCluster("cluster must be nonempty")
    if len(members) == 1:
        return 0.0
    idx = np.asarray(members, dtype=int)
    pair_sum = float(d.d[np.ix_(idx, idx)].sum()) / 2.0
    if objective == "ssd_analogue":
        return pair_sum / len(members)
    if objective == "mean_pairwise":
        m = len(members)
        return pair_sum / (m * (m - 1) / 2)
    raise ValueError(f"unknown objective {objective!r}")


def admission_test(
    cluster: Sequence[int], frontier: Sequence[int], d: DistanceMatrix
) -> int:
    """Best frontier unit to admit: argmin of the mean pairwise distance
    over cluster + candidate; ties go to the lowest unit id."""
    if not frontier:
        raise EmptyFrontier("no units contiguous to the cluster")
    idx = np.asarray(sorted(cluster), dtype=int)
    pair_sum = float(d.d[np.ix_(idx, idx)].sum()) / 2.0 if len(idx) > 1 else 0.0
    m = len(idx) + 1
    n_pairs = m * (m - 1) / 2
    best = None
    for q in sorted(frontier, key=lambda q: d.units[q].id):
        score = (pair_sum + float(d.d[idx, q].sum())) / n_pairs
        if best is None or score < best[0]:
            best = (score, q)
    return best[1]


class _Subtree:
    """A connected piece of the spanning tree plus its cached split gains."""

    __slots__ = ("members", "edges", "cost", "splits")

    def __init__(self, members, edges, d, objective):
        self.members = sorted(members)
        self.edges = sorted(edges)
        self.cost = cluster_cost(self.members, d, objective)
        # splits: (gain, edge, side_a, side_b) for every removable edge
        self.splits = []
        if not self.edges:
            return
        adj: dict[int, list[tuple[int, int, int]]] = {v: [] for v in self.members}
        for a, b in self.edges:
            adj[a].append((b, a, b))
            adj[b].append((a, a, b))
        member_set = set(self.members)
        for edge in self.edges:
            a, b = edge
            side = set()
            stack = [a]
            seen = {a, b}
            while stack:
                v = stack.pop()
                side.add(v)
                for w, _, _ in adj[v]:
                    if w not in seen and (v, w) != edge and (w, v) != edge:
                        seen.add(w)
                        stack.append(w)
            other = member_set - side
            gain = (
                self.cost
                - cluster_cost(sorted(side), d, objective)
                - cluster_cost(sorted(other), d, objective)
            )
            self.splits.append((gain, edge, sorted(side), sorted(other)))


# how many of the highest-gain first splits seed independent greedy runs
_RESTARTS = 16


@dataclass(frozen=True)
class _Cluster:
    """Finished cluster: sorted member indices plus cached cost."""

    members: list[int]
    cost: float


def _greedy_rounds(tree, d, k, min_size, objective, first=None):
    """One greedy pass; `first` forces the initial removal. Returns
    (objective, removed edges, subtrees) or None when the pass gets stuck."""
    n = tree.graph.n
    subtrees = [_Subtree(range(n), tree.edges, d, objective)]
    removed: list[tuple[int, int]] = []
    for round_no in range(k - 1):
        best = None  # (key, subtree index, edge, side_a, side_b)
        for si, st in enumerate(subtrees):
            for gain, edge, side_a, side_b in st.splits:
                if len(side_a) < min_size or len(side_b) < min_size:
                    continue
                if round_no == 0 and first is not None and edge != first:
                    continue
                key = (-gain, edge)
                if best is None or key < best[0]:
                    best = (key, si, edge, side_a, side_b)
        if best is None:
            return None
        _, si, edge, side_a, side_b = best
        removed.append(edge)
        old = subtrees.pop(si)
        a_set = set(side_a)
        b_set = set(side_b)
        edges_a = [e for e in old.edges if e != edge and e[0] in a_set]
        edges_b = [e for e in old.edges if e != edge and e[0] in b_set]
        subtrees.append(_Subtree(side_a, edges_a, d, objective))
        subtrees.append(_Subtree(side_b, edges_b, d, objective))
    total = float(sum(st.cost for st in subtrees))
    return total, removed, subtrees


def _components_after(tree, removed: set) -> list[list[int]]:
    n = tree.graph.n
    adj: list[list[int]] = [[] for _ in range(n)]
    for e in tree.edges:
        if e not in removed:
            a, b = e
            adj[a].append(b)
            adj[b].append(a)
    seen = [False] * n
    comps = []
    for start in range(n):
        if seen[start]:
            continue
        seen[start] = True
        stack = [start]
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


def _removed_objective(tree, d, removed, min_size, objective):
    """Objective of an edge-removal set, or None when a cluster is too small."""
    comps = _components_after(tree, set(removed))
    total = 0.0
    for comp in comps:
        if len(comp) < min_size:
            return None
        total += cluster_cost(comp, d, objective)
    return total


def _swap_refine(tree, d, removed, cur, min_size, objective):
    """Best-improvement local search: replace one removed edge by another
    while the objective decreases; deterministic tie-breaks."""
    removed = sorted(removed)
    while True:
        best = None  # (objective, edge out, edge in)
        for r in removed:
            keep = [x for x in removed if x != r]
            keep_set = set(keep)
            for e in tree.edges:
                if e == r or e in keep_set:
                    continue
                obj = _removed_objective(tree, d, keep + [e], min_size, objective)
                if obj is None or obj >= cur - 1e-12:
                    continue
                key = (obj, r, e)
                if best is None or key < best:
                    best = key
        if best is None:
            return removed, cur
        cur, r, e = best
        removed = sorted(x for x in removed if x != r) + [e]
        removed.sort()


def skater_partition(
    tree: SpanningTree,
    d: DistanceMatrix,
    k: int,
    min_size: int = 2,
    objective: str = "ssd_analogue",
) -> Partition:
    """Edge-removal partition of the spanning tree into k clusters.

    Each greedy round removes the feasible edge (both sides >= min_size)
    with the largest cost reduction; ties break on the lexicographically
    smallest edge. The pass is restarted from each of the top first
    splits, and the best run is polished by single-edge swaps. Raises
    InfeasibleMinSize when no run can complete.
    """
    n = tree.graph.n
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}")
    if min_size < 1 or k * min_size > n:
        raise InfeasibleMinSize(f"k={k} clusters of >= {min_size} units need <= {n} units")
    if k == 1:
        st = _Subtree(range(n), tree.edges, d, objective)
        return _finish_partition(tree, d, [st], k, [], objective)

    root = _Subtree(range(n), tree.edges, d, objective)
    firsts = sorted(
        ((-gain, edge) for gain, edge, a, b in root.splits
         if len(a) >= min_size and len(b) >= min_size),
    )[:_RESTARTS]

    best = None  # (objective, removed edges)
    for _, first in firsts:
        run = _greedy_rounds(tree, d, k, min_size, objective, first=first)
        if run is None:
            continue
        total, removed, _ = run
        key = (total, sorted(removed))
        if best is None or key < best:
            best = key
    if best is None:
        raise InfeasibleMinSize("no feasible edge at some round")

    removed, _ = _swap_refine(tree, d, best[1], best[0], min_size, objective)
    clusters = [
        _Cluster(comp, cluster_cost(comp, d, objective))
        for comp in _components_after(tree, set(removed))
    ]
    return _finish_partition(tree, d, clusters, k, removed, objective)


def _finish_partition(tree, d, subtrees, k, removed, objective) -> Partition:
    # deterministic labels: clusters ordered by their lowest unit index
    subtrees = sorted(subtrees, key=lambda st: st.members[0])
    labels = [0] * tree.graph.n
    costs = []
    for label, st in enumerate(subtrees, start=1):
        for v in st.members:
            labels[v] = label
        costs.append(st.cost)
    return Partition(
        units=tree.graph.units,
        labels=tuple(labels),
        k=k,
        objective=float(sum(costs)),
        cluster_costs=tuple(costs),
        removed_edges=tuple(sorted(removed)),
    )


def farthest_point_seeds(d: DistanceMatrix, k: int) -> list[int]:
    """Greedy farthest-point seed selection on the distance matrix."""
    n = len(d.units)
    if k == 1:
        return [0]
    pairs = [
        (-d.d[i, j], i, j) for i in range(n) for j in range(i + 1, n)
    ]
    _, i0, j0 = min(pairs)
    seeds = [i0, j0]
    while len(seeds) < k:
        best = None
        for q in range(n):
            if q in seeds:
                continue
            score = min(float(d.d[q, s]) for s in seeds)
            key = (-score, d.units[q].id)
            if best is None or key < best[0]:
                best = (key, q)
        seeds.append(best[1])
    return sorted(seeds)


def grow_partition(
    tree: SpanningTree,
    d: DistanceMatrix,
    k: int,
    seeds: Optional[Sequence[int]] = None,
    objective: str = "ssd_analogue",
) -> Partition:
    """Agglomerative mode: grow clusters from seeds along the tree.

    Clusters take turns absorbing their admission-test winner from the
    unassigned units adjacent to them in the spanning tree, until every
    unit is assigned.
    """
    n = tree.graph.n
    if seeds is None:
        seeds = farthest_point_seeds(d, k)
    seeds = list(seeds)
    if len(set(seeds)) != len(seeds):
        raise SeedOverlap("duplicate seeds")
    if len(seeds) != k:
        raise ValueError(f"need exactly k={k} seeds")

    adj: list[list[int]] = [[] for _ in range(n)]
    for a, b in tree.edges:
        adj[a].append(b)
        adj[b].append(a)

    assigned = {s: ci for ci, s in enumerate(seeds)}
    clusters: list[list[int]] = [[s] for s in seeds]
    while len(assigned) < n:
        progress = False
        for ci in range(k):
            frontier = sorted(
                {
                    w
                    for v in clusters[ci]
                    for w in adj[v]
                    if w not in assigned
                }
            )
            if not frontier:
                continue
            win = admission_test(clusters[ci], frontier, d)
            clusters[ci].append(win)
            assigned[win] = ci
            progress = True
            if len(assigned) == n:
                break
        if not progress:
            raise EmptyFrontier("no cluster can grow; tree not connected?")

    kept = [
        (a, b)
        for a, b in tree.edges
        if assigned[a] == assigned[b]
    ]
    removed = sorted(e for e in tree.edges if e not in set(kept))
    subtrees = [
        _Subtree(
            members,
            [(a, b) for a, b in kept if assigned[a] == ci],
            d,
            objective,
        )
        for ci, members in enumerate(clusters)
    ]
    return _finish_partition(tree, d, subtrees, k, removed, objective)
