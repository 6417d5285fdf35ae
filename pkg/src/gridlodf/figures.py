"""Matplotlib renderings written next to the delimited report outputs."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import networkx as nx
import numpy as np

from .factors import FactorSet
from .model import Network


def save_lodf_heatmap(fs: FactorSet, path: str, color_limit: float = 1.0) -> None:
    """Heatmap of |K| in block-sorted line order, cell boundaries marked."""
    order = list(fs.block_order)
    mag = np.abs(fs.lodf[np.ix_(order, order)])
    mag = np.nan_to_num(mag, nan=0.0)
    fig, ax = plt.subplots(figsize=(7, 6))
    im = ax.imshow(np.clip(mag, 0.0, color_limit), cmap="viridis",
                   vmin=0.0, vmax=color_limit, interpolation="nearest")
    from .topology import block_decomposition

    dec = block_decomposition(fs.system.network)
    boundaries = []
    offset = len(dec.bridges)
    if offset:
        boundaries.append(offset)
    for cell in dec.cells[:-1]:
        offset += len(cell)
        boundaries.append(offset)
    labels = [fs.system.network.line_labels[l] for l in order]
    step = max(1, len(order) // 30)
    ax.set_xticks(range(0, len(order), step))
    ax.set_xticklabels(labels[::step], rotation=90, fontsize=6)
    ax.set_yticks(range(0, len(order), step))
    ax.set_yticklabels(labels[::step], fontsize=6)
    for b in boundaries:
        ax.axhline(b - 0.5, color="red", lw=0.8)
        ax.axvline(b - 0.5, color="red", lw=0.8)
    fig.colorbar(im, ax=ax, label="|K|")
    ax.set_xlabel("outaged line")
    ax.set_ylabel("monitored line")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def _layout(net: Network) -> dict[int, tuple[float, float]]:
    G = nx.Graph()
    G.add_nodes_from(b.id for b in net.buses)
    G.add_edges_from((ln.tail, ln.head) for ln in net.lines)
    return nx.spring_layout(G, seed=7)


def save_influence_figure(net: Network, edges: list[tuple[int, int]], path: str) -> None:
    """Physical network in blue with grey influence links between the
    midpoints of coupled lines."""
    pos = _layout(net)
    fig, ax = plt.subplots(figsize=(7, 6))
    mids = {}
    for ln in net.lines:
        x = [pos[ln.tail][0], pos[ln.head][0]]
        y = [pos[ln.tail][1], pos[ln.head][1]]
        ax.plot(x, y, color="tab:blue", lw=1.4, zorder=2)
        mids[ln.id] = ((x[0] + x[1]) / 2, (y[0] + y[1]) / 2)
    for l, l_hat in edges:
        (x0, y0), (x1, y1) = mids[l], mids[l_hat]
        ax.plot([x0, x1], [y0, y1], color="grey", lw=0.5, alpha=0.6, zorder=1)
    xs = [pt[0] for pt in pos.values()]
    ys = [pt[1] for pt in pos.values()]
    ax.scatter(xs, ys, s=12, color="black", zorder=3)
    ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_outage_figure(report_json: dict, path: str) -> None:
    """Bar chart of per-line flow changes, one panel per island."""
    islands = report_json["islands"]
    panels = [isl for isl in islands if isl["delta_f"]]
    if not panels:
        panels = islands[:1]
    fig, axes = plt.subplots(len(panels), 1, figsize=(8, 2.6 * len(panels)),
                             squeeze=False)
    for ax, isl in zip(axes[:, 0], panels):
        lines = [d["line"] for d in isl["delta_f"]]
        values = [d["value"] for d in isl["delta_f"]]
        flagged = [d["predicted_zero"] for d in isl["delta_f"]]
        colors = ["lightgrey" if z else "tab:orange" for z in flagged]
        ax.bar(range(len(lines)), values, color=colors)
        ax.set_xticks(range(len(lines)))
        ax.set_xticklabels([str(l) for l in lines], fontsize=7, rotation=90)
        ax.axhline(0.0, color="black", lw=0.6)
        ax.set_ylabel("delta f")
        ax.set_title(f"island {min(isl['nodes'])}..{max(isl['nodes'])} "
                     f"(grey = predicted zero)", fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
