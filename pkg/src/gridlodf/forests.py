"""Brute-force combinatorial oracle: spanning trees, spanning 2-forests,
weighted sums, and the signed tree expansion of the transfer-factor
numerator.  Everything here enumerates edge subsets outright and exists to
validate the closed-form linear-algebra routes on small graphs.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .dcflow import LaplacianSystem
from .model import Network
from .util import GridError

MAX_BUSES = 10
MAX_LINES = 16


@dataclass(frozen=True)
class ForestFamily:
    edge_sets: tuple[frozenset[int], ...]
    weight_sum: float
    kind: str  # "spanning_tree" | "two_forest"
    groups: tuple[frozenset[int], frozenset[int]] | None = None


def _guard(net: Network) -> None:
    if net.n > MAX_BUSES or net.m > MAX_LINES:
        raise GridError("OVER_LIMIT",
                        f"enumeration limited to n<={MAX_BUSES}, m<={MAX_LINES}; "
                        f"got n={net.n}, m={net.m}")


class _UnionFind:
    __slots__ = ("parent",)

    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        p = self.parent
        while p[x] != x:
            p[x] = p[p[x]]
            x = p[x]
        return x

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[ra] = rb
        return True


def _chi(net: Network, edges) -> float:
    w = 1.0
    for k in edges:
        w *= net.lines[k].susceptance
    return w


def _acyclic_components(net: Network, subset) -> list[int] | None:
    """Component label per bus position if the subset is a forest, else None."""
    uf = _UnionFind(net.n)
    pos = net.bus_position
    for k in subset:
        ln = net.lines[k]
        if not uf.union(pos[ln.tail], pos[ln.head]):
            return None
    return [uf.find(v) for v in range(net.n)]


def spanning_trees(net: Network) -> ForestFamily:
    """All spanning trees with their susceptance-product weight sum."""
    _guard(net)
    found = []
    total = 0.0
    for subset in itertools.combinations(range(net.m), net.n - 1):
        if _acyclic_components(net, subset) is not None:
            found.append(frozenset(subset))
            total += _chi(net, subset)
    return ForestFamily(edge_sets=tuple(found), weight_sum=total, kind="spanning_tree")


def two_forests(net: Network, group1, group2) -> ForestFamily:
    """All spanning 2-forests whose two trees separate group1 from group2."""
    _guard(net)
    n1 = frozenset(group1)
    n2 = frozenset(group2)
    if not n1 or not n2 or (n1 & n2):
        raise GridError("INVALID_PARTITION",
                        f"groups must be nonempty and disjoint: {sorted(n1)}, {sorted(n2)}")
    pos = net.bus_position
    found = []
    total = 0.0
    for subset in itertools.combinations(range(net.m), net.n - 2):
        labels = _acyclic_components(net, subset)
        if labels is None:
            continue
        # n vertices and n-2 forest edges leave exactly two components.
        side1 = {labels[pos[b]] for b in n1}
        side2 = {labels[pos[b]] for b in n2}
        if len(side1) == 1 and len(side2) == 1 and side1 != side2:
            found.append(frozenset(subset))
            total += _chi(net, subset)
    return ForestFamily(edge_sets=tuple(found), weight_sum=total,
                        kind="two_forest", groups=(n1, n2))


def two_forest_sum(net: Network, group1, group2) -> float:
    """Weight sum of two_forests, with overlapping groups counting as an
    empty family instead of an error (needed by the cross-product sums)."""
    if frozenset(group1) & frozenset(group2):
        return 0.0
    return two_forests(net, group1, group2).weight_sum


def verify_A_entry(net: Network, sys: LaplacianSystem, i: int, j: int) -> tuple[float, float]:
    """The 2-forest ratio and the matrix entry A_ij, for comparison."""
    _guard(net)
    slack = net.slack_id
    if i == slack or j == slack:
        raise GridError("SLACK_EXCLUDED", "A entries are indexed by non-slack buses")
    combinatorial = two_forests(net, {i, j}, {slack}).weight_sum / spanning_trees(net).weight_sum
    pos = net.bus_position
    algebraic = float(sys.reduced_inverse[pos[i], pos[j]])
    return combinatorial, algebraic


def verify_cross_product(net: Network, sys: LaplacianSystem,
                         i: int, j: int, w: int, z: int) -> tuple[float, float]:
    """Signed 2-forest difference against A_iw + A_jz - A_iz - A_jw."""
    _guard(net)
    slack = net.slack_id
    if slack in (i, j, w, z):
        raise GridError("SLACK_EXCLUDED", "cross product is over non-slack buses")
    total = spanning_trees(net).weight_sum
    combinatorial = (two_forest_sum(net, {i, w}, {j, z})
                     - two_forest_sum(net, {i, z}, {j, w})) / total
    pos = net.bus_position
    A = sys.reduced_inverse
    algebraic = float(A[pos[i], pos[w]] + A[pos[j], pos[z]]
                      - A[pos[i], pos[z]] - A[pos[j], pos[w]])
    return combinatorial, algebraic


def signed_expansion(net: Network, e_i: int, e_j: int) -> float:
    """Signed weight sum over spanning trees through e_i avoiding e_j.

    Only trees in which removing e_i separates the endpoints of e_j
    contribute; the sign is + when the probe tail lands on the carrying
    tail's side.  The result equals the transfer factor D[e_i, e_j] scaled
    by the total spanning-tree weight (carrying-edge susceptance included).
    """
    _guard(net)
    if e_i == e_j:
        raise GridError("SAME_EDGE",
                        "the diagonal case is the plain tree sum through the edge")
    u, v = net.lines[e_i].tail, net.lines[e_i].head
    w, z = net.lines[e_j].tail, net.lines[e_j].head
    pos = net.bus_position
    total = 0.0
    for tree in spanning_trees(net).edge_sets:
        if e_i not in tree or e_j in tree:
            continue
        labels = _acyclic_components(net, [k for k in tree if k != e_i])
        u_side = labels[pos[u]]
        w_on_u = labels[pos[w]] == u_side
        z_on_u = labels[pos[z]] == u_side
        if w_on_u == z_on_u:
            continue
        total += _chi(net, tree) if w_on_u else -_chi(net, tree)
    return total


def tree_sum_through(net: Network, e: int) -> float:
    """Weight sum of spanning trees containing line e (the diagonal case)."""
    _guard(net)
    return sum(_chi(net, t) for t in spanning_trees(net).edge_sets if e in t)


def two_forest_labelings(net: Network) -> list[tuple[tuple[int, ...], float]]:
    """Every spanning 2-forest as (component label per bus position, weight).

    Batch form of two_forests for callers that sweep many group pairs over
    one network: membership questions reduce to label comparisons.
    """
    _guard(net)
    out = []
    for subset in itertools.combinations(range(net.m), net.n - 2):
        labels = _acyclic_components(net, subset)
        if labels is not None:
            out.append((tuple(labels), _chi(net, subset)))
    return out


def signed_expansion_table(net: Network) -> dict[tuple[int, int], float]:
    """signed_expansion for every ordered line pair in one sweep.

    Walks each spanning tree once, splitting it on each contained line and
    crediting every absent probe line whose endpoints straddle the split.
    """
    _guard(net)
    pos = net.bus_position
    acc: dict[tuple[int, int], float] = {
        (a, b): 0.0 for a in range(net.m) for b in range(net.m) if a != b
    }
    for tree in spanning_trees(net).edge_sets:
        chi = _chi(net, tree)
        absent = [k for k in range(net.m) if k not in tree]
        for e_i in tree:
            labels = _acyclic_components(net, [k for k in tree if k != e_i])
            u_side = labels[pos[net.lines[e_i].tail]]
            for e_j in absent:
                w_on_u = labels[pos[net.lines[e_j].tail]] == u_side
                z_on_u = labels[pos[net.lines[e_j].head]] == u_side
                if w_on_u != z_on_u:
                    acc[(e_i, e_j)] += chi if w_on_u else -chi
    return acc


def reduced_determinant(net: Network) -> float:
    """det of the Laplacian with the slack row/column deleted (matrix-tree LHS)."""
    from .model import incidence_matrix

    C = incidence_matrix(net)
    b = np.array([ln.susceptance for ln in net.lines])
    L = (C * b) @ C.T
    s = net.slack_position
    keep = [k for k in range(net.n) if k != s]
    return float(np.linalg.det(L[np.ix_(keep, keep)]))
