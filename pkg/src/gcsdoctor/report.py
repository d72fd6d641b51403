"""Report rendering: constraint-graph figures plus delimited part/option tables.

Figures draw entities as nodes and two-operand constraints as edges; detected
parts are color-coded (edge colors for dependency groups, node colors for
well-constrained parts).  Tables are plain CSV so reports can be diffed and
post-processed.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import networkx as nx

from .model import ConstraintKind, Model
from .options import ResolutionOption
from .overdetect import OverPart
from .welldetect import WellPart

_PART_COLORS = [
    "#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e",
    "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f",
]
_NEUTRAL_EDGE = "#b0b0b0"
_NEUTRAL_NODE = "#d9d9d9"


def _constraint_graph(m: Model) -> nx.MultiGraph:
    g = nx.MultiGraph()
    for e in m.entities:
        g.add_node(e.id, kind=e.kind.value)
    for c in m.constraints:
        if len(c.entities) == 2:
            g.add_edge(c.entities[0], c.entities[1], key=c.id, cid=c.id)
    return g


def _edge_label(m: Model, cid: str) -> str:
    c = m.constraint(cid)
    if c.parameter is None:
        return f"{cid}:{c.kind.value}"
    value = c.parameter
    if c.kind is ConstraintKind.ANGLE:
        value = math.degrees(value)
    return f"{cid}:{c.kind.value}={value:g}"


def render_parts_figure(
    m: Model,
    path: Path,
    over_parts: Sequence[OverPart] = (),
    well_parts: Sequence[WellPart] = (),
    title: Optional[str] = None,
) -> Path:
    """Draw the constraint graph with parts color-coded; returns the path."""
    path = Path(path)
    g = _constraint_graph(m)
    pos = nx.spring_layout(g, seed=7) if g.number_of_nodes() else {}

    cid_color = {}
    for i, part in enumerate(over_parts):
        for cid in part.constraints:
            cid_color.setdefault(cid, _PART_COLORS[i % len(_PART_COLORS)])
    node_color = {}
    for i, part in enumerate(well_parts):
        for eid in part.entities:
            node_color[eid] = _PART_COLORS[i % len(_PART_COLORS)]

    fig, ax = plt.subplots(figsize=(7, 5.5))
    for u, v, key in g.edges(keys=True):
        color = cid_color.get(key, _NEUTRAL_EDGE)
        width = 2.6 if key in cid_color else 1.2
        xs = [pos[u][0], pos[v][0]]
        ys = [pos[u][1], pos[v][1]]
        ax.plot(xs, ys, color=color, linewidth=width, zorder=1)
        ax.annotate(
            _edge_label(m, key),
            ((xs[0] + xs[1]) / 2, (ys[0] + ys[1]) / 2),
            fontsize=6.5,
            color=color if key in cid_color else "#606060",
            ha="center",
        )
    for node, (x, y) in pos.items():
        ax.scatter(
            [x], [y], s=620, color=node_color.get(node, _NEUTRAL_NODE),
            edgecolors="#303030", zorder=2,
        )
        ax.annotate(node, (x, y), ha="center", va="center", fontsize=8, zorder=3)
    singles = [c for c in m.constraints if len(c.entities) == 1]
    if singles:
        note = ", ".join(_edge_label(m, c.id) for c in singles)
        ax.set_xlabel(f"unary constraints: {note}", fontsize=7)
    ax.set_title(title or "constraint graph")
    ax.set_xticks([])
    ax.set_yticks([])
    fig.tight_layout()
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_comparison_figure(
    m: Model,
    path: Path,
    optimal_over: Sequence[OverPart] = (),
    greedy_over: Sequence[OverPart] = (),
    optimal_well: Sequence[WellPart] = (),
    greedy_well: Sequence[WellPart] = (),
) -> Path:
    """Side-by-side optimal vs greedy decomposition figure."""
    path = Path(path)
    tmp_a = path.with_suffix(".optimal.png")
    tmp_b = path.with_suffix(".greedy.png")
    render_parts_figure(m, tmp_a, optimal_over, optimal_well, title="optimal detection")
    render_parts_figure(m, tmp_b, greedy_over, greedy_well, title="greedy baseline")
    fig, axes = plt.subplots(1, 2, figsize=(13, 5.5))
    for ax, img_path in zip(axes, (tmp_a, tmp_b)):
        ax.imshow(plt.imread(img_path))
        ax.axis("off")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    tmp_a.unlink()
    tmp_b.unlink()
    return path


def write_parts_csv(
    path: Path,
    over_parts: Sequence[OverPart] = (),
    well_parts: Sequence[WellPart] = (),
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["part_index", "kind", "size", "members"])
        for i, part in enumerate(over_parts, start=1):
            writer.writerow(
                [i, "over", len(part.constraints), ";".join(part.constraints)]
            )
        for part in well_parts:
            writer.writerow(
                [part.rank_order, "well", len(part.entities), ";".join(part.entities)]
            )
    return path


def write_options_csv(path: Path, options: Sequence[ResolutionOption]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["rank", "option_id", "action", "constraint", "precedence", "score"]
        )
        for rank, opt in enumerate(options, start=1):
            writer.writerow(
                [rank, opt.id, opt.action, opt.describe(), opt.precedence, opt.score]
            )
    return path
