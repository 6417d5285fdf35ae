"""Structural graph analysis: block (biconnected) decomposition, bridges,
cut vertices, simple-path-through-a-line queries, and the participating-block
predicates used by the localization results.

All functions are pure over immutable inputs.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import networkx as nx

from .model import Network
from .util import GridError

BRIDGE = -1


@dataclass(frozen=True)
class ParticipationProfile:
    """Nonnegative per-bus balancing weights summing to one."""

    alpha: dict[int, float]

    def __post_init__(self):
        total = sum(self.alpha.values())
        if any(v < 0 for v in self.alpha.values()):
            raise GridError("BAD_ALPHA", "negative participation weight")
        if abs(total - 1.0) > 1e-12:
            raise GridError("BAD_ALPHA", f"weights sum to {total!r}, expected 1")

    @cached_property
    def participating_set(self) -> frozenset[int]:
        return frozenset(k for k, v in self.alpha.items() if v > 0)

    def weight(self, bus: int) -> float:
        return self.alpha.get(bus, 0.0)

    @staticmethod
    def uniform(bus_ids) -> "ParticipationProfile":
        ids = list(bus_ids)
        w = 1.0 / len(ids)
        alpha = {b: w for b in ids}
        # Compensate accumulated rounding on one entry so the sum is exact.
        alpha[ids[-1]] = 1.0 - w * (len(ids) - 1)
        return ParticipationProfile(alpha)

    @staticmethod
    def single(bus_id: int) -> "ParticipationProfile":
        return ParticipationProfile({bus_id: 1.0})

    @staticmethod
    def from_weights(weights: dict[int, float]) -> "ParticipationProfile":
        total = sum(weights.values())
        if total <= 0 or any(v < 0 for v in weights.values()):
            raise GridError("BAD_ALPHA", "weights must be nonnegative with positive sum")
        alpha = {k: v / total for k, v in weights.items() if v > 0}
        drift = 1.0 - sum(alpha.values())
        first = next(iter(alpha))
        alpha[first] += drift
        return ParticipationProfile(alpha)


@dataclass(frozen=True)
class BlockDecomposition:
    cells: tuple[frozenset[int], ...]
    bridges: frozenset[int]
    cut_vertices: frozenset[int]
    cell_of: dict[int, int]  # line id -> cell index, or BRIDGE

    def to_json_dict(self) -> dict:
        return {
            "cells": [sorted(c) for c in self.cells],
            "bridges": sorted(self.bridges),
            "cut_vertices": sorted(self.cut_vertices),
        }


def _collapsed(net: Network) -> tuple[nx.Graph, dict[frozenset[int], list[int]]]:
    """Simple-graph collapse plus the map from endpoint pair to line ids.

    Parallel lines do not change vertex cuts, so articulation points and the
    vertex sets of blocks can be read off the collapse; the only correction
    needed is that a collapsed edge of multiplicity >= 2 is a two-vertex
    cycle, hence a cell rather than a bridge.
    """
    G = nx.Graph()
    G.add_nodes_from(b.id for b in net.buses)
    pair_lines: dict[frozenset[int], list[int]] = {}
    for ln in net.lines:
        key = frozenset((ln.tail, ln.head))
        pair_lines.setdefault(key, []).append(ln.id)
        G.add_edge(ln.tail, ln.head)
    return G, pair_lines


def block_decomposition(net: Network) -> BlockDecomposition:
    """Partition the edge set into 2-connected cells and singleton bridges.

    Cells come out in nondecreasing edge-count order, ties broken by the
    smallest contained line id.
    """
    G, pair_lines = _collapsed(net)
    cells: list[frozenset[int]] = []
    bridges: set[int] = set()
    for comp in nx.biconnected_component_edges(G):
        line_ids: list[int] = []
        for u, v in comp:
            line_ids.extend(pair_lines[frozenset((u, v))])
        if len(line_ids) == 1:
            bridges.add(line_ids[0])
        else:
            cells.append(frozenset(line_ids))
    cells.sort(key=lambda c: (len(c), min(c)))
    cell_of: dict[int, int] = {b: BRIDGE for b in bridges}
    for idx, cell in enumerate(cells):
        for lid in cell:
            cell_of[lid] = idx
    return BlockDecomposition(
        cells=tuple(cells),
        bridges=frozenset(bridges),
        cut_vertices=frozenset(nx.articulation_points(G)),
        cell_of=cell_of,
    )


def same_cell(dec: BlockDecomposition, l: int, l_hat: int) -> bool:
    """True iff both lines are non-bridges belonging to the same cell."""
    a = dec.cell_of[l]
    b = dec.cell_of[l_hat]
    return a != BRIDGE and a == b


def simple_path_through_line(net: Network, l: int, src: int, dst: int) -> bool:
    """Does some simple src-dst path traverse line l?

    Reduced to two vertex-disjoint paths from {src, dst} to the endpoints of
    l via a unit-vertex-capacity max flow (Menger); either pairing of the
    terminals yields a valid path through the line.
    """
    line = net.lines[l]
    i, j = line.tail, line.head
    if src == dst:
        return False
    if {src, dst} == {i, j}:
        return True
    G, _ = _collapsed(net)
    if src in (i, j) or dst in (i, j):
        # One endpoint of the path sits on the line; the line can only be
        # traversed there, so the rest is plain reachability avoiding it.
        if src in (i, j):
            on, far, free = src, (j if src == i else i), dst
        else:
            on, far, free = dst, (j if dst == i else i), src
        H = G.copy()
        H.remove_node(on)
        return nx.has_path(H, free, far)

    D = nx.DiGraph()
    for v in G.nodes:
        D.add_edge((v, 0), (v, 1), capacity=1)
    for u, v in G.edges:
        D.add_edge((u, 1), (v, 0), capacity=1)
        D.add_edge((v, 1), (u, 0), capacity=1)
    D.add_edge("S", (src, 0), capacity=1)
    D.add_edge("S", (dst, 0), capacity=1)
    D.add_edge((i, 1), "T", capacity=1)
    D.add_edge((j, 1), "T", capacity=1)
    value, _ = nx.maximum_flow(D, "S", "T")
    return value >= 2


def participating_blocks(net: Network, dec: BlockDecomposition,
                         prof: ParticipationProfile) -> set[int]:
    """Cell indices containing a participating bus that is not a cut vertex."""
    eligible = prof.participating_set - dec.cut_vertices
    out = set()
    for idx, cell in enumerate(dec.cells):
        vertices = set()
        for lid in cell:
            vertices.add(net.lines[lid].tail)
            vertices.add(net.lines[lid].head)
        if vertices & eligible:
            out.add(idx)
    return out


def block_on_simple_path(net: Network, dec: BlockDecomposition, cell: int,
                         j_hat: int, prof: ParticipationProfile) -> bool:
    """True iff some line of the cell lies on a simple path from j_hat to a
    participating bus."""
    for lid in sorted(dec.cells[cell]):
        for k in sorted(prof.participating_set):
            if simple_path_through_line(net, lid, j_hat, k):
                return True
    return False


def lines_on_simple_path(net: Network, line_ids, j_hat: int,
                         prof: ParticipationProfile) -> set[int]:
    """Subset of line_ids lying on a simple path from j_hat to a participant."""
    hits = set()
    for lid in line_ids:
        for k in sorted(prof.participating_set):
            if simple_path_through_line(net, lid, j_hat, k):
                hits.add(lid)
                break
    return hits
