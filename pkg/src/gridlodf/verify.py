"""The identity-verification suite behind the CLI `verify` subcommand.

Each check compares a closed-form linear-algebra route against the
brute-force forest enumeration on graphs small enough for the oracle,
returning one pass/fail row per identity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import forests
from .dcflow import build_system, quadratic_form_equiv, solve_flows, solve_flows_pinv
from .factors import effective_reactance, glodf, ptdf, spanning_tree_centrality
from .model import Bus, Line, Network, drop_lines


@dataclass
class CheckRow:
    name: str
    passed: bool
    detail: str

    def format(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def random_connected_network(rng: np.random.Generator, n: int, m: int,
                             b_range=(0.5, 2.0), balanced: bool = True) -> Network:
    """Random connected multigraph with uniform susceptances in b_range.

    Starts from a random spanning tree, then adds the remaining lines
    between random distinct bus pairs (parallel lines permitted).
    """
    ids = list(range(1, n + 1))
    pairs = []
    shuffled = ids.copy()
    rng.shuffle(shuffled)
    for k in range(1, n):
        anchor = shuffled[int(rng.integers(0, k))]
        pairs.append((shuffled[k], anchor))
    while len(pairs) < m:
        a, b = rng.choice(ids, size=2, replace=False)
        pairs.append((int(a), int(b)))
    sus = rng.uniform(b_range[0], b_range[1], size=len(pairs))
    lines = tuple(
        Line(id=k, tail=t, head=h, reactance=1.0 / s, susceptance=float(s))
        for k, ((t, h), s) in enumerate(zip(pairs, sus))
    )
    p = rng.normal(size=n) if balanced else np.zeros(n)
    p -= p.mean()
    buses = tuple(
        Bus(id=b, injection=float(p[k]), is_slack=(k == n - 1))
        for k, b in enumerate(ids)
    )
    return Network(buses=buses, lines=lines)


def check_network(net: Network, rng: np.random.Generator,
                  pair_samples: int = 12) -> list[CheckRow]:
    """Run every oracle identity on one network within enumeration guards."""
    rows: list[CheckRow] = []
    sys = build_system(net)
    trees = forests.spanning_trees(net)
    slack = net.slack_id
    non_slack = [b.id for b in net.buses if b.id != slack]
    pos = net.bus_position

    det = forests.reduced_determinant(net)
    gap = abs(det - trees.weight_sum)
    rows.append(CheckRow(
        "matrix-tree", gap <= 1e-9 * trees.weight_sum,
        f"{len(trees.edge_sets)} trees, weight {trees.weight_sum:.6g}, "
        f"det gap {gap:.2e}"))

    worst = 0.0
    for i in non_slack:
        for j in non_slack:
            comb, alg = forests.verify_A_entry(net, sys, i, j)
            worst = max(worst, abs(comb - alg))
    rows.append(CheckRow("graphical-inverse", worst <= 1e-9,
                         f"max |forest ratio - A| = {worst:.2e}"))

    worst = 0.0
    if len(non_slack) >= 2:
        quads = list(itertools.product(non_slack, repeat=4))
        take = [quads[int(k)] for k in
                rng.choice(len(quads), size=min(pair_samples, len(quads)), replace=False)]
        for i, j, w, z in take:
            comb, alg = forests.verify_cross_product(net, sys, i, j, w, z)
            worst = max(worst, abs(comb - alg))
    rows.append(CheckRow("cross-product", worst <= 1e-9,
                         f"max gap {worst:.2e} over {pair_samples} tuples"))

    worst = 0.0
    for i, j in itertools.combinations(non_slack, 2):
        lhs, rhs = quadratic_form_equiv(sys, i, j)
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    p = net.injection_vector()
    flow_gap = float(np.abs(solve_flows(sys, p) - solve_flows_pinv(sys, p)).max(initial=0.0))
    rows.append(CheckRow("pinv-equivalence", worst <= 1e-9 and flow_gap <= 1e-9,
                         f"quadratic form gap {worst:.2e}, two-route flow gap {flow_gap:.2e}"))

    worst = 0.0
    for ln in net.lines:
        r = effective_reactance(sys, ln.tail, ln.head)
        c = forests.tree_sum_through(net, ln.id) / trees.weight_sum
        worst = max(worst, abs(r - ln.reactance * c))
        worst = max(worst, abs(spanning_tree_centrality(sys, ln.id) - c))
    rows.append(CheckRow("effective-reactance", worst <= 1e-9,
                         f"max |R - X*c| gap {worst:.2e}"))

    worst = 0.0
    checked = 0
    for ln in net.lines:
        reduced, kept = drop_lines(net, [ln.id])
        if not reduced.is_connected():
            continue
        checked += 1
        K = glodf(sys, [ln.id])
        f_pre = solve_flows(sys, p)
        post = build_system(reduced)
        f_post = solve_flows(post, p)
        predicted = f_pre[list(kept)] + K[:, 0] * f_pre[ln.id]
        worst = max(worst, float(np.abs(predicted - f_post).max(initial=0.0)))
    scale = 1e-8 * (1.0 + float(np.abs(solve_flows(sys, p)).max(initial=0.0)))
    rows.append(CheckRow("single-outage-resolve", worst <= scale,
                         f"{checked} non-bridge outages, max gap {worst:.2e}"))

    worst = 0.0
    if len(non_slack) >= 2:
        i, j = non_slack[0], non_slack[1]
        for w in non_slack:
            lhs = forests.two_forest_sum(net, {i, w}, {slack})
            rhs = (forests.two_forest_sum(net, {i, j, w}, {slack})
                   + forests.two_forest_sum(net, {i, w}, {j, slack}))
            worst = max(worst, abs(lhs - rhs))
    rows.append(CheckRow("forest-decomposition", worst <= 1e-9 * (1 + trees.weight_sum),
                         f"disjoint-union residual {worst:.2e}"))

    worst = 0.0
    pairs = [(a, b) for a in range(net.m) for b in range(net.m) if a != b]
    take = [pairs[int(k)] for k in
            rng.choice(len(pairs), size=min(pair_samples, len(pairs)), replace=False)]
    for e_i, e_j in take:
        signed = forests.signed_expansion(net, e_i, e_j)
        d = ptdf(sys, e_i, net.lines[e_j].tail, net.lines[e_j].head)
        worst = max(worst, abs(signed - d * trees.weight_sum))
    rows.append(CheckRow("signed-expansion", worst <= 1e-9 * (1 + trees.weight_sum),
                         f"max numerator gap {worst:.2e}"))
    return rows


def merge_rows(per_network: list[list[CheckRow]]) -> list[CheckRow]:
    """Collapse per-network rows into one row per identity."""
    by_name: dict[str, list[CheckRow]] = {}
    for rows in per_network:
        for row in rows:
            by_name.setdefault(row.name, []).append(row)
    merged = []
    for name, rows in by_name.items():
        bad = [r for r in rows if not r.passed]
        if bad:
            merged.append(CheckRow(name, False,
                                   f"{len(bad)}/{len(rows)} networks failed; "
                                   f"first: {bad[0].detail}"))
        else:
            merged.append(CheckRow(name, True, f"{len(rows)} networks"))
    return merged
