"""DC power flow line-failure localization toolkit.

Library layout mirrors the analysis pipeline: ``model`` parses and validates
cases, ``dcflow`` factors the Laplacian, ``topology`` decomposes the graph,
``factors`` computes distribution factors, ``outage`` handles islanding and
the full factor matrix, ``forests`` is the brute-force combinatorial oracle,
and ``cli`` ties it together.
"""

from .dcflow import LaplacianSystem, build_system, solve_flows
from .factors import FactorSet, Perturbation, effective_reactance, glodf, perturb, ptdf
from .model import (Bus, CaseDiagnostics, Line, Network, incidence_matrix,
                    parse_case, serialize, susceptance_matrix)
from .outage import (CutSetOutage, FlowChangeReport, IslandModel, Prediction,
                     classify_cut, cutset_flow_change, full_lodf_matrix,
                     influence_graph)
from .topology import (BlockDecomposition, ParticipationProfile,
                       block_decomposition, same_cell, simple_path_through_line)
from .util import GridError

__version__ = "0.1.0"

__all__ = [
    "Bus", "Line", "Network", "CaseDiagnostics", "parse_case", "serialize",
    "incidence_matrix", "susceptance_matrix",
    "LaplacianSystem", "build_system", "solve_flows",
    "BlockDecomposition", "ParticipationProfile", "block_decomposition",
    "same_cell", "simple_path_through_line",
    "FactorSet", "Perturbation", "ptdf", "glodf", "effective_reactance", "perturb",
    "CutSetOutage", "IslandModel", "FlowChangeReport", "Prediction",
    "classify_cut", "cutset_flow_change", "full_lodf_matrix", "influence_graph",
    "GridError",
    "__version__",
]
