"""Distribution factors: PTDF, generalized LODF for simultaneous non-cut
outages, effective reactance, spanning-tree centrality, and seeded
susceptance perturbation.

The transfer factor here carries the line susceptance prefactor, so it is a
physical flow change per unit of shifted injection.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .dcflow import LaplacianSystem, build_system
from .model import ORIENTATION_STAMP, Network, drop_lines
from .util import GridError


@dataclass(frozen=True)
class Perturbation:
    seed: int
    relative_magnitude: float

    def __post_init__(self):
        if not 0.0 <= self.relative_magnitude < 0.5:
            raise ValueError("relative magnitude must lie in [0, 0.5) to keep "
                             "susceptances positive")


@dataclass(frozen=True)
class FactorSet:
    """Full line-outage factor matrix plus the metadata needed to read it."""

    system: LaplacianSystem
    lodf: np.ndarray                 # m x m, column = outaged line
    column_kind: tuple[str, ...]     # "bridge" | "non_bridge"
    block_order: tuple[int, ...]     # line ids, bridges first then cells by size
    column_diagnostics: dict[int, str]
    orientation: str = ORIENTATION_STAMP

    def ptdf(self, line: int, source: int, sink: int) -> float:
        return ptdf(self.system, line, source, sink)


def ptdf(sys: LaplacianSystem, line: int, source: int, sink: int) -> float:
    """Flow change on a line per unit injected at source, withdrawn at sink."""
    ln = sys.network.lines[line]
    pos = sys.network.bus_position
    i, j = pos[ln.tail], pos[ln.head]
    w, z = pos[source], pos[sink]
    A = sys.reduced_inverse
    return float(ln.susceptance * (A[i, w] + A[j, z] - A[i, z] - A[j, w]))


def line_transfer_matrix(sys: LaplacianSystem) -> np.ndarray:
    """m x m matrix whose (l, l_hat) entry is the flow change on l per unit
    shifted across l_hat's endpoints (tail in, head out)."""
    CtAC = sys.incidence.T @ sys.reduced_inverse @ sys.incidence
    return sys.susceptance[:, None] * CtAC


def _is_cut(net: Network, trip) -> bool:
    reduced, _ = drop_lines(net, trip)
    return not reduced.is_connected()


def glodf(sys: LaplacianSystem, outaged) -> np.ndarray:
    """Generalized LODF for a simultaneous non-cut outage set.

    Rows follow the surviving lines in ascending id order, columns follow the
    order of ``outaged``.  Flow changes are K @ f_outaged.
    """
    net = sys.network
    outaged = list(outaged)
    survivors = [k for k in range(net.m) if k not in set(outaged)]
    if not outaged:
        return np.zeros((net.m, 0))
    if _is_cut(net, outaged):
        raise GridError("CUT_SET",
                        f"lines {sorted(outaged)} disconnect the network; "
                        f"route through the outage module instead")
    A = sys.reduced_inverse
    C = sys.incidence
    b = sys.susceptance
    Cf = C[:, outaged]
    M = np.eye(len(outaged)) - (b[outaged][:, None] * (Cf.T @ A @ Cf))
    cond = np.linalg.cond(M)
    if not np.isfinite(cond) or cond > 1e12:
        raise GridError("SINGULAR_OUTAGE",
                        f"outage operator ill-conditioned (cond ~ {cond:.2e})")
    numer = b[survivors][:, None] * (C[:, survivors].T @ A @ Cf)
    return np.linalg.solve(M.T, numer.T).T


def effective_reactance(sys: LaplacianSystem, i: int, j: int) -> float:
    """Network-reduced reactance A_ii + A_jj - 2 A_ij between two buses.

    With the slack row/column of A embedded as zeros the formula already
    covers slack endpoints, and the value is slack-invariant.
    """
    if i == j:
        raise GridError("INVALID_PARTITION", "effective reactance needs two distinct buses")
    pos = sys.network.bus_position
    a, b = pos[i], pos[j]
    A = sys.reduced_inverse
    return float(A[a, a] + A[b, b] - 2.0 * A[a, b])


def spanning_tree_centrality(sys: LaplacianSystem, line: int) -> float:
    """Weighted fraction of spanning trees containing the line (R/X)."""
    ln = sys.network.lines[line]
    return effective_reactance(sys, ln.tail, ln.head) * ln.susceptance


def perturb(net: Network, pert: Perturbation) -> Network:
    """Same topology with independently perturbed susceptances.

    Each susceptance is scaled by (1 + u) with u uniform on the signed
    magnitude interval; deterministic for a fixed seed.
    """
    rng = np.random.default_rng(pert.seed)
    u = rng.uniform(-pert.relative_magnitude, pert.relative_magnitude, size=net.m)
    if pert.relative_magnitude == 0.0:
        return net
    lines = tuple(
        replace(ln, susceptance=ln.susceptance * (1.0 + u[k]),
                reactance=1.0 / (ln.susceptance * (1.0 + u[k])))
        for k, ln in enumerate(net.lines)
    )
    return Network(buses=net.buses, lines=lines)


def single_outage_column(sys: LaplacianSystem, line: int,
                         transfer: np.ndarray | None = None) -> np.ndarray:
    """LODF column for one non-bridge outage, full length m with -1 on the
    diagonal entry."""
    if transfer is None:
        transfer = line_transfer_matrix(sys)
    denom = 1.0 - transfer[line, line]
    if abs(denom) < 1e-12:
        raise GridError("SINGULAR_OUTAGE",
                        f"line {line} carries its full transfer (bridge?); "
                        f"single-outage factor undefined")
    col = transfer[:, line] / denom
    col[line] = -1.0
    return col


def rebuild_with_slack(net: Network, slack_id: int) -> LaplacianSystem:
    """System for the same network with a different designated slack."""
    buses = tuple(replace(b, is_slack=(b.id == slack_id)) for b in net.buses)
    return build_system(Network(buses=buses, lines=net.lines))
