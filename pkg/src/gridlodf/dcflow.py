"""Laplacian assembly and DC flow solves.

Builds L = C B C^T, the reduced inverse A (slack row/column deleted,
re-embedded as zeros), and the Moore-Penrose pseudoinverse of L via a
rank-deflated SPD solve.  Flow solves go through A; the pseudoinverse route
exists as an independent second path and is what the test oracles compare
against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .model import Network, incidence_matrix, susceptance_matrix
from .util import GridError, zero_threshold


@dataclass(frozen=True)
class LaplacianSystem:
    network: Network
    laplacian: np.ndarray       # L, n x n
    reduced_inverse: np.ndarray  # A, n x n with zero slack row/column
    pseudoinverse: np.ndarray   # L+, n x n
    incidence: np.ndarray       # C, n x m
    susceptance: np.ndarray     # B diagonal entries, length m

    @property
    def slack_position(self) -> int:
        return self.network.slack_position


def build_system(net: Network) -> LaplacianSystem:
    """Factor the network once; the result is immutable and shareable."""
    C = incidence_matrix(net)
    b = np.array([ln.susceptance for ln in net.lines])
    L = (C * b) @ C.T
    n = net.n
    s = net.slack_position
    keep = [k for k in range(n) if k != s]

    A = np.zeros((n, n))
    if keep:
        Lbar = L[np.ix_(keep, keep)]
        try:
            cho = scipy.linalg.cho_factor(Lbar)
            Abar = scipy.linalg.cho_solve(cho, np.eye(len(keep)))
        except scipy.linalg.LinAlgError as exc:
            raise GridError("SINGULAR_REDUCED",
                            f"reduced Laplacian is not positive definite: {exc}") from exc
        residual = float(np.abs(Lbar @ Abar - np.eye(len(keep))).max())
        if residual > 1e-6:
            raise GridError("SINGULAR_REDUCED",
                            f"reduced Laplacian numerically rank-deficient "
                            f"(inverse residual {residual:.2e})")
        A[np.ix_(keep, keep)] = Abar

    # L+ = (L + J/n)^-1 - J/n where J is the all-ones matrix: the all-ones
    # direction is deflated to eigenvalue 1, inverted, then removed again.
    J = np.full((n, n), 1.0 / n)
    try:
        cho = scipy.linalg.cho_factor(L + J)
        Lpinv = scipy.linalg.cho_solve(cho, np.eye(n)) - J
    except scipy.linalg.LinAlgError as exc:
        raise GridError("SINGULAR_REDUCED",
                        f"Laplacian deflation failed (disconnected?): {exc}") from exc

    return LaplacianSystem(network=net, laplacian=L, reduced_inverse=A,
                           pseudoinverse=Lpinv, incidence=C, susceptance=b)


def solve_flows(sys: LaplacianSystem, p: np.ndarray) -> np.ndarray:
    """Branch flows f = B C^T A p for a balanced injection vector p."""
    p = np.asarray(p, dtype=float)
    scale = float(np.abs(p).max(initial=0.0))
    if abs(p.sum()) > zero_threshold(scale):
        raise GridError("UNBALANCED_INJECTION",
                        f"injections sum to {p.sum():.3e}; rebalance first")
    return sys.susceptance * (sys.incidence.T @ (sys.reduced_inverse @ p))


def solve_flows_pinv(sys: LaplacianSystem, p: np.ndarray) -> np.ndarray:
    """Same flows through the pseudoinverse route, f = B C^T L+ p."""
    p = np.asarray(p, dtype=float)
    scale = float(np.abs(p).max(initial=0.0))
    if abs(p.sum()) > zero_threshold(scale):
        raise GridError("UNBALANCED_INJECTION",
                        f"injections sum to {p.sum():.3e}; rebalance first")
    return sys.susceptance * (sys.incidence.T @ (sys.pseudoinverse @ p))


def solve_angles(sys: LaplacianSystem, p: np.ndarray) -> np.ndarray:
    """Phase angles with the slack pinned to zero (theta = A p)."""
    p = np.asarray(p, dtype=float)
    return sys.reduced_inverse @ p


def quadratic_form_equiv(sys: LaplacianSystem, i: int, j: int) -> tuple[float, float]:
    """The L+ and A quadratic forms for the bus pair (i, j).

    Returns (lhs, rhs) with lhs built from the pseudoinverse and rhs from the
    reduced inverse; the two agree for non-slack buses.
    """
    net = sys.network
    if i == net.slack_id or j == net.slack_id:
        raise GridError("SLACK_EXCLUDED", "quadratic form is defined for non-slack buses")
    a = net.bus_position[i]
    b = net.bus_position[j]
    Lp = sys.pseudoinverse
    A = sys.reduced_inverse
    lhs = float(Lp[a, a] + Lp[b, b] - Lp[a, b] - Lp[b, a])
    rhs = float(A[a, a] + A[b, b] - A[a, b] - A[b, a])
    return lhs, rhs
