"""Islanding engine: cut-set classification, proportional rebalancing, the
bridge and cut-set flow-change formulas, localization predicates, and the
full line-outage factor matrix including bridge columns.

Sign conventions: a tie line's stored flow is import-positive for its
island; the full matrix's bridge columns are divided by the parent-oriented
flow, so they read in the same frame as every other column.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import NamedTuple

import numpy as np

from .dcflow import build_system, solve_flows
from .factors import FactorSet, glodf, line_transfer_matrix, ptdf, single_outage_column
from .model import Bus, Line, Network, drop_lines
from .topology import (BRIDGE, BlockDecomposition, ParticipationProfile,
                       block_decomposition, lines_on_simple_path)
from .util import GridError, zero_threshold


@dataclass(frozen=True)
class CutSetOutage:
    tripped: frozenset[int]

    def __post_init__(self):
        if not self.tripped:
            raise ValueError("an outage needs at least one tripped line")


class TieLine(NamedTuple):
    line: int        # parent line id
    inside_bus: int  # endpoint inside the island
    flow: float      # import-positive pre-contingency flow


@dataclass(frozen=True)
class IslandModel:
    """One post-contingency connected component, in pre-contingency terms.

    ``network`` is the island graph over its buses including any tripped
    internal lines; island line k corresponds to parent line
    ``parent_line_ids[k]``.
    """

    network: Network
    parent_line_ids: tuple[int, ...]
    internal_tripped: frozenset[int]   # parent line ids
    tie_lines: tuple[TieLine, ...]
    alpha: ParticipationProfile
    pre_flows: np.ndarray              # island line order
    warnings: tuple[str, ...] = ()

    @property
    def nodes(self) -> tuple[int, ...]:
        return tuple(b.id for b in self.network.buses)

    @property
    def slack(self) -> int:
        return self.network.slack_id

    def local_line(self, parent_id: int) -> int:
        return self.parent_line_ids.index(parent_id)


@dataclass(frozen=True)
class FlowChangeReport:
    """Per-surviving-line flow changes and their decomposition.

    ``predicted_zero`` is a sufficient condition only: lines not flagged may
    still end up unchanged when the internal and tie contributions cancel.
    """

    lines: tuple[int, ...]             # parent line ids of the survivors
    delta_f: np.ndarray
    internal_term: np.ndarray
    tie_term: np.ndarray
    predicted_zero: tuple[bool, ...]


class Prediction(enum.Enum):
    ZERO = "ZERO"
    NONZERO_AS = "NONZERO_AS"


def _restrict_alpha(alpha, bus_ids) -> tuple[ParticipationProfile, str | None]:
    """Per-island profile from a global one: restrict and renormalize.

    An island left without any participating bus falls back to uniform
    sharing (every island must rebalance somehow); the fallback is reported
    as a warning rather than an error.
    """
    inside = set(bus_ids)
    if alpha is None:
        return ParticipationProfile.uniform(sorted(inside)), None
    if isinstance(alpha, ParticipationProfile):
        weights = {b: alpha.weight(b) for b in inside if alpha.weight(b) > 0}
    else:
        weights = {b: w for b, w in dict(alpha).items() if b in inside and w > 0}
    if not weights:
        return (ParticipationProfile.uniform(sorted(inside)),
                f"no participating bus inside island {sorted(inside)}; "
                f"falling back to uniform sharing")
    return ParticipationProfile.from_weights(weights), None


def classify_cut(net: Network, outage, injections=None, alpha=None) -> list[IslandModel]:
    """Split the network along a tripped line set into island models.

    Tripped lines are classified per island as external (ignored), tie
    (one endpoint inside, import-positive flow), or internal.  Tie lines
    whose pre-contingency flow is numerically zero are dropped with a
    warning; they have no effect on the island.  A trip set that is not a
    cut yields a single degenerate island covering the whole network.
    """
    if not isinstance(outage, CutSetOutage):
        outage = CutSetOutage(frozenset(outage))
    for lid in outage.tripped:
        if not 0 <= lid < net.m:
            raise ValueError(f"tripped line {lid} does not exist")
    p = net.injection_vector() if injections is None else np.asarray(injections, float)
    sys = build_system(net)
    f_pre = solve_flows(sys, p)
    f_scale = float(np.abs(f_pre).max(initial=0.0))

    # Connected components of the post-contingency graph.
    parent = {b.id: b.id for b in net.buses}

    def root(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for ln in net.lines:
        if ln.id in outage.tripped:
            continue
        ra, rb = root(ln.tail), root(ln.head)
        if ra != rb:
            parent[ra] = rb

    groups: dict[int, list[int]] = {}
    for b in net.buses:
        groups.setdefault(root(b.id), []).append(b.id)
    components = sorted(groups.values(), key=min)

    pos = net.bus_position
    islands = []
    for members in components:
        inside = set(members)
        warnings: list[str] = []
        slack_id = net.slack_id if net.slack_id in inside else min(inside)
        buses = tuple(
            Bus(id=b.id, injection=b.injection, is_slack=(b.id == slack_id))
            for b in net.buses if b.id in inside
        )
        internal_parent: list[int] = []
        tripped_internal: set[int] = set()
        ties: list[TieLine] = []
        for ln in net.lines:
            t_in, h_in = ln.tail in inside, ln.head in inside
            if t_in and h_in:
                internal_parent.append(ln.id)
                if ln.id in outage.tripped:
                    tripped_internal.add(ln.id)
                    if abs(f_pre[ln.id]) <= zero_threshold(f_scale):
                        warnings.append(
                            f"tripped internal line {ln.id} carries no pre-contingency "
                            f"flow; it contributes nothing")
            elif ln.id in outage.tripped and (t_in or h_in):
                j_hat = ln.head if h_in else ln.tail
                flow = f_pre[ln.id] if h_in else -f_pre[ln.id]
                if abs(flow) <= zero_threshold(f_scale):
                    warnings.append(
                        f"tie line {ln.id} carries no pre-contingency flow; dropped")
                    continue
                ties.append(TieLine(line=ln.id, inside_bus=j_hat, flow=float(flow)))
        lines = tuple(
            replace(net.lines[pid], id=k) for k, pid in enumerate(internal_parent)
        )
        island_net = Network(buses=buses, lines=lines)
        profile, alpha_warning = _restrict_alpha(alpha, inside)
        if alpha_warning:
            warnings.append(alpha_warning)
        islands.append(IslandModel(
            network=island_net,
            parent_line_ids=tuple(internal_parent),
            internal_tripped=frozenset(tripped_internal),
            tie_lines=tuple(ties),
            alpha=profile,
            pre_flows=f_pre[internal_parent].copy() if internal_parent else np.zeros(0),
            warnings=tuple(warnings),
        ))
    return islands


def tie_delta(island: IslandModel) -> np.ndarray:
    """Injection vector modeling the pre-contingency tie imports."""
    v = np.zeros(island.network.n)
    pos = island.network.bus_position
    for tie in island.tie_lines:
        v[pos[tie.inside_bus]] += tie.flow
    return v


def balance_delta(island: IslandModel) -> np.ndarray:
    """Proportional-control injection adjustment restoring island balance."""
    total = sum(tie.flow for tie in island.tie_lines)
    v = np.zeros(island.network.n)
    pos = island.network.bus_position
    for b, w in island.alpha.alpha.items():
        if b not in pos:
            raise GridError("BAD_ALPHA", f"participating bus {b} is outside the island")
        v[pos[b]] += w * total
    return v


def _alpha_vector(island: IslandModel) -> np.ndarray:
    v = np.zeros(island.network.n)
    pos = island.network.bus_position
    for b, w in island.alpha.alpha.items():
        if b not in pos:
            raise GridError("BAD_ALPHA", f"participating bus {b} is outside the island")
        v[pos[b]] = w
    return v


def bridge_lodf(island: IslandModel, l: int, l_hat: int) -> float:
    """Distribution factor of a single bridge outage on surviving line l.

    Both ids are parent ids; the value is relative to the island's
    import-positive tie flow.
    """
    if island.internal_tripped or len(island.tie_lines) != 1:
        raise GridError("USE_CUTSET_OP",
                        "bridge factor needs a single tie and no internal trips")
    tie = island.tie_lines[0]
    if tie.line != l_hat:
        raise ValueError(f"line {l_hat} is not this island's tie ({tie.line})")
    sys = build_system(island.network)
    local = island.local_line(l)
    return sum(
        island.alpha.alpha[k] * ptdf(sys, local, k, tie.inside_bus)
        for k in sorted(island.alpha.participating_set)
    )


def _predicted_zero_flags(island: IslandModel,
                          dec: BlockDecomposition) -> dict[int, bool]:
    """Per surviving local line: may the theory certify a zero flow change?

    A line is certified when its cell holds no tripped internal line and the
    cell is not on a simple path from any tie endpoint to any participating
    bus.  The converse can fail by cancellation, so no flag means no claim.
    """
    net = island.network
    tripped_local = {island.parent_line_ids.index(pid) for pid in island.internal_tripped}
    cells_with_trip = {dec.cell_of[l] for l in tripped_local}

    survivors = set(range(net.m)) - tripped_local
    on_path: set[int] = set()
    for tie in island.tie_lines:
        on_path |= lines_on_simple_path(net, sorted(survivors), tie.inside_bus,
                                        island.alpha)

    flags: dict[int, bool] = {}
    for l in sorted(survivors):
        cell = dec.cell_of[l]
        if cell != BRIDGE and cell in cells_with_trip:
            flags[l] = False
            continue
        cell_lines = [l] if cell == BRIDGE else (dec.cells[cell] & survivors)
        flags[l] = not any(k in on_path for k in cell_lines)
    return flags


def localization_report(island: IslandModel) -> tuple[bool, ...]:
    """predicted_zero flags for the island's surviving lines, in order."""
    dec = block_decomposition(island.network)
    flags = _predicted_zero_flags(island, dec)
    return tuple(flags[l] for l in sorted(flags))


def cutset_flow_change(island: IslandModel) -> FlowChangeReport:
    """Exact flow changes on the island's surviving lines.

    The internal term weighs tripped internal flows by the generalized
    outage factors; the tie term pushes the rebalancing injections through
    the post-contingency transfer matrix, which is computed both from the
    post-contingency system and from the pre-contingency one and must agree.
    """
    net = island.network
    tripped_local = sorted(island.parent_line_ids.index(pid)
                           for pid in island.internal_tripped)
    survivors = [k for k in range(net.m) if k not in set(tripped_local)]

    post_net, _ = drop_lines(net, tripped_local)
    if not post_net.is_connected():
        raise GridError("INVALID_ISLAND",
                        "internal tripped lines form a cut of the island")

    sys = build_system(net)
    try:
        K = glodf(sys, tripped_local)
    except GridError as exc:
        if exc.code == "CUT_SET":
            raise GridError("INVALID_ISLAND", exc.message) from exc
        raise
    C = sys.incidence
    b = sys.susceptance
    A = sys.reduced_inverse

    post_sys = build_system(post_net)
    d_post = post_sys.susceptance[:, None] * (post_sys.incidence.T @ post_sys.reduced_inverse)
    bct_surv = b[survivors][:, None] * C[:, survivors].T
    if tripped_local:
        bct_trip = b[tripped_local][:, None] * C[:, tripped_local].T
        d_pre = (bct_surv + K @ bct_trip) @ A
    else:
        d_pre = bct_surv @ A
    scale = float(np.abs(d_post).max(initial=0.0))
    gap = float(np.abs(d_post - d_pre).max(initial=0.0))
    if gap > 1e-9 * (1.0 + scale):
        raise GridError("DF_FORM_MISMATCH",
                        f"pre/post transfer forms disagree by {gap:.3e}")

    internal = K @ island.pre_flows[tripped_local]
    alpha_vec = _alpha_vector(island)
    pos = net.bus_position
    g = np.zeros(net.n)
    for tie in island.tie_lines:
        shift = alpha_vec.copy()
        shift[pos[tie.inside_bus]] -= 1.0
        g += tie.flow * shift
    tie_term = d_post @ g

    dec = block_decomposition(net)
    flags = _predicted_zero_flags(island, dec)
    return FlowChangeReport(
        lines=tuple(island.parent_line_ids[k] for k in survivors),
        delta_f=internal + tie_term,
        internal_term=internal,
        tie_term=tie_term,
        predicted_zero=tuple(flags[k] for k in survivors),
    )


def simple_path_prediction(island: IslandModel, l: int, l_hat: int) -> Prediction:
    """ZERO when no simple path from the tie endpoint to a participant uses
    the line; NONZERO_AS is the almost-sure converse."""
    if island.internal_tripped:
        raise GridError("USE_CUTSET_OP", "path prediction covers pure tie outages")
    tie = next((t for t in island.tie_lines if t.line == l_hat), None)
    if tie is None:
        raise ValueError(f"line {l_hat} is not a tie of this island")
    local = island.local_line(l)
    hits = lines_on_simple_path(island.network, [local], tie.inside_bus, island.alpha)
    return Prediction.NONZERO_AS if local in hits else Prediction.ZERO


def full_lodf_matrix(net: Network, alpha=None, injections=None) -> FactorSet:
    """m x m outage factor matrix covering bridge and non-bridge columns.

    Non-bridge columns come from the single-outage specialization of the
    generalized factors; bridge columns come from islanding with
    proportional control, expressed against the parent-oriented bridge
    flow.  Diagonal entries are -1: an outaged line loses its own flow.
    """
    sys = build_system(net)
    dec = block_decomposition(net)
    m = net.m
    K = np.zeros((m, m))
    diagnostics: dict[int, str] = {}
    transfer = line_transfer_matrix(sys)

    for l_hat in range(m):
        if dec.cell_of[l_hat] == BRIDGE:
            continue
        try:
            K[:, l_hat] = single_outage_column(sys, l_hat, transfer)
        except GridError as exc:
            diagnostics[l_hat] = exc.message
            K[:, l_hat] = np.nan
            K[l_hat, l_hat] = -1.0

    if dec.bridges:
        p = net.injection_vector() if injections is None else np.asarray(injections, float)
        f_pre = solve_flows(sys, p)
        f_scale = float(np.abs(f_pre).max(initial=0.0))
        for l_hat in sorted(dec.bridges):
            K[l_hat, l_hat] = -1.0
            if abs(f_pre[l_hat]) <= zero_threshold(f_scale):
                diagnostics[l_hat] = "zero pre-contingency bridge flow; ratio undefined, column zeroed"
                continue
            for island in classify_cut(net, CutSetOutage(frozenset({l_hat})),
                                       injections=p, alpha=alpha):
                if island.network.m == 0:
                    continue
                report = cutset_flow_change(island)
                for pid, df in zip(report.lines, report.delta_f):
                    K[pid, l_hat] = df / f_pre[l_hat]

    order = sorted(dec.bridges)
    for cell in dec.cells:
        order.extend(sorted(cell))
    kinds = tuple("bridge" if dec.cell_of[l] == BRIDGE else "non_bridge"
                  for l in range(m))
    return FactorSet(system=sys, lodf=K, column_kind=kinds,
                     block_order=tuple(order), column_diagnostics=diagnostics)


def influence_graph(K: np.ndarray, threshold: float = 0.005) -> list[tuple[int, int]]:
    """Undirected influence edges between lines whose mutual factor
    magnitude reaches the threshold."""
    m = K.shape[0]
    edges = []
    with np.errstate(invalid="ignore"):
        mag = np.abs(K)
    for l in range(m):
        for l_hat in range(l + 1, m):
            a = mag[l, l_hat] if np.isfinite(mag[l, l_hat]) else 0.0
            b = mag[l_hat, l] if np.isfinite(mag[l_hat, l]) else 0.0
            if max(a, b) >= threshold:
                edges.append((l, l_hat))
    return edges


def outage_report_json(islands, reports) -> dict:
    """JSON-ready structure for an outage run (one entry per island)."""
    out = []
    for island, report in zip(islands, reports):
        out.append({
            "nodes": list(island.nodes),
            "slack": island.slack,
            "tie": [{"line": t.line, "j": t.inside_bus, "flow": t.flow}
                    for t in island.tie_lines],
            "internal_tripped": sorted(island.internal_tripped),
            "warnings": list(island.warnings),
            "delta_f": [
                {
                    "line": int(line),
                    "value": float(v),
                    "internal_term": float(it),
                    "tie_term": float(tt),
                    "predicted_zero": bool(pz),
                }
                for line, v, it, tt, pz in zip(
                    report.lines, report.delta_f, report.internal_term,
                    report.tie_term, report.predicted_zero)
            ],
        })
    return {"islands": out,
            "note": "predicted_zero is sufficient only; unflagged lines may "
                    "still cancel to zero"}
