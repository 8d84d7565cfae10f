"""Debrief figures. Everything renders off-screen to files."""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import FancyArrowPatch  # noqa: E402

from .core import NotssCategory, Role  # noqa: E402
from .graphs import InteractionGraph, degrees  # noqa: E402
from .physiology import VitalSigns  # noqa: E402

CATEGORY_COLORS = {
    NotssCategory.SITUATIONAL_AWARENESS: "#1f77b4",
    NotssCategory.DECISION_MAKING: "#d62728",
    NotssCategory.COMMUNICATION_TEAMWORK: "#2ca02c",
    NotssCategory.LEADERSHIP: "#9467bd",
}
ROLE_COLORS = {Role.SURGEON: "#4c72b0", Role.ANESTHESIOLOGIST: "#dd8452", Role.NURSE: "#55a868"}

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 7,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
}


def _save(fig, path: str | Path) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(p, bbox_inches="tight", metadata={"Software": None})
    plt.close(fig)
    return p


def _layout(nodes: Sequence[Role]) -> dict[Role, tuple[float, float]]:
    n = len(nodes)
    return {r: (math.cos(math.pi / 2 + 2 * math.pi * i / n),
                math.sin(math.pi / 2 + 2 * math.pi * i / n)) for i, r in enumerate(nodes)}


def plot_interaction_graph(g: InteractionGraph, path: str | Path, title: str | None = None) -> Path:
    """Nodes on a circle; parallel edges fan out as arcs coloured by category."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5, 5))
        pos = _layout(g.nodes)
        seen: dict[tuple[Role, Role], int] = {}
        for e in g.edges:
            k = seen.get((e.source, e.target), 0)
            seen[(e.source, e.target)] = k + 1
            arrow = FancyArrowPatch(
                pos[e.source], pos[e.target], arrowstyle="-|>", mutation_scale=12,
                connectionstyle=f"arc3,rad={0.12 + 0.1 * k}", shrinkA=22, shrinkB=22,
                color=CATEGORY_COLORS[e.category], lw=1.2, alpha=0.85)
            ax.add_patch(arrow)
        for r, (x, y) in pos.items():
            ax.scatter([x], [y], s=1600, color=ROLE_COLORS[r], zorder=3)
            ax.annotate(r.value[0], (x, y), ha="center", va="center", color="white",
                        zorder=4, weight="bold")
            # name sits just outside the disc, away from the centre
            ax.annotate(r.value, (x, y + (0.3 if y >= 0 else -0.3)), ha="center",
                        va="center", fontsize=8, zorder=4)
        handles = [plt.Line2D([], [], color=c, lw=2, label=cat.display)
                   for cat, c in CATEGORY_COLORS.items()]
        ax.legend(handles=handles, loc="lower center", bbox_to_anchor=(0.5, -0.12), ncol=2,
                  frameon=False)
        ax.set_xlim(-1.6, 1.6)
        ax.set_ylim(-1.6, 1.6)
        ax.set_aspect("equal")
        ax.axis("off")
        if title:
            ax.set_title(title)
        return _save(fig, path)


def plot_degrees(g: InteractionGraph, path: str | Path) -> Path:
    deg = degrees(g)
    roles = list(g.nodes)
    x = range(len(roles))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4, 3))
        w = 0.38
        ax.bar([i - w / 2 for i in x], [deg[r].in_degree for r in roles], w, label="in-degree",
               color="#8da0cb")
        ax.bar([i + w / 2 for i in x], [deg[r].out_degree for r in roles], w, label="out-degree",
               color="#fc8d62")
        ax.set_xticks(list(x))
        ax.set_xticklabels([r.value for r in roles])
        ax.set_ylabel("events")
        ax.yaxis.get_major_locator().set_params(integer=True)
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_vitals(trajectory: Sequence[tuple[float, VitalSigns]], path: str | Path,
                events: Sequence[dict] = ()) -> Path:
    """HR, MAP, SpO2 and EtCO2 against session time, with event markers."""
    t = [p[0] for p in trajectory]
    series = [
        ("HR (bpm)", [v.hr for _, v in trajectory]),
        ("MAP (mmHg)", [v.map for _, v in trajectory]),
        ("SpO2 (%)", [v.spo2 for _, v in trajectory]),
        ("EtCO2 (mmHg)", [v.etco2 for _, v in trajectory]),
    ]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(len(series), 1, figsize=(6, 6), sharex=True)
        for ax, (label, ys) in zip(axes, series):
            ax.plot(t, ys, lw=1.2, color="k")
            ax.set_ylabel(label)
            for ev in events:
                ax.axvline(float(ev["t"]), color="0.6", lw=0.6, ls="--")
        for ev in events:
            label = ev.get("kind", "") + (f" {ev['stage']}" if "stage" in ev else "")
            axes[0].annotate(label, (float(ev["t"]), 1.0), xycoords=("data", "axes fraction"),
                             rotation=90, fontsize=6, va="bottom", ha="center", color="0.4")
        axes[-1].set_xlabel("session time (s)")
        return _save(fig, path)


def plot_likert(columns: dict[str, Sequence[float]], path: str | Path) -> Path:
    items = list(columns)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(max(4, 0.45 * len(items)), 3))
        ax.boxplot([list(columns[i]) for i in items], medianprops={"color": "k"})
        ax.set_xticks(range(1, len(items) + 1))
        ax.set_xticklabels(items)
        ax.set_ylim(0.5, 5.5)
        ax.set_yticks([1, 2, 3, 4, 5])
        ax.set_ylabel("response")
        return _save(fig, path)
