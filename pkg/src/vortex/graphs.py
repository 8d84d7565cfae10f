"""Directed interaction multigraphs, team network metrics and exporters."""

from __future__ import annotations

import statistics
from dataclasses import dataclass, field
from typing import Iterable, Sequence
from xml.sax.saxutils import escape, quoteattr

from .core import NotssCategory, Role, format_timestamp
from .errors import NoData, ValidationFailure
from .jsonio import canonical_dumps

GRAPH_FORMAT = "vortex-graph/1"
EXPORT_FORMATS = ("canonical-json", "dot", "graphml")


class UnsupportedFormat(ValidationFailure):
    pass


@dataclass(frozen=True)
class InteractionEdge:
    source: Role
    target: Role
    category: NotssCategory
    t: int
    rationale: str = ""

    def __post_init__(self):
        if self.source is self.target:
            raise ValidationFailure(f"self-edge on {self.source.value}")

    @property
    def timestamp(self) -> str:
        return format_timestamp(self.t)

    @property
    def description(self) -> str:
        return f"{self.timestamp} {self.rationale}".rstrip()

    def identity(self) -> tuple:
        return (self.source, self.target, self.category, self.t, self.rationale)


@dataclass(frozen=True)
class InteractionGraph:
    nodes: tuple[Role, ...]
    edges: tuple[InteractionEdge, ...] = ()
    duration: float | None = None

    def __post_init__(self):
        nodes = tuple(sorted(set(self.nodes), key=lambda r: r.rank))
        object.__setattr__(self, "nodes", nodes)
        for e in self.edges:
            if e.source not in nodes or e.target not in nodes:
                raise ValidationFailure(f"edge endpoint outside node set: {e}")
            if self.duration is not None and not 0 <= e.t <= self.duration:
                raise ValidationFailure(f"edge at t={e.t} outside session")
        # stable sort keeps the source order of simultaneous events
        object.__setattr__(self, "edges", tuple(sorted(self.edges, key=lambda e: e.t)))

    @classmethod
    def team(cls, edges: Iterable[InteractionEdge] = (), duration: float | None = None):
        return cls(tuple(Role), tuple(edges), duration)


@dataclass(frozen=True)
class NodeDegree:
    in_degree: int
    out_degree: int


def degrees(g: InteractionGraph) -> dict[Role, NodeDegree]:
    """Event counts per node; parallel edges each count once."""
    ins = {r: 0 for r in g.nodes}
    outs = {r: 0 for r in g.nodes}
    for e in g.edges:
        outs[e.source] += 1
        ins[e.target] += 1
    return {r: NodeDegree(ins[r], outs[r]) for r in g.nodes}


def undirected_neighbors(g: InteractionGraph) -> dict[Role, set[Role]]:
    nbrs: dict[Role, set[Role]] = {r: set() for r in g.nodes}
    for e in g.edges:
        nbrs[e.source].add(e.target)
        nbrs[e.target].add(e.source)
    return nbrs


def clustering(g: InteractionGraph) -> dict[Role, float]:
    """Local clustering on the simple undirected projection of the multigraph."""
    nbrs = undirected_neighbors(g)
    out = {}
    for node, ns in nbrs.items():
        k = len(ns)
        if k < 2:
            out[node] = 0.0
            continue
        ns_list = sorted(ns, key=lambda r: r.rank)
        links = sum(1 for i, a in enumerate(ns_list) for b in ns_list[i + 1:] if b in nbrs[a])
        out[node] = links / (k * (k - 1) / 2)
    return out


METRICS = ("in_degree", "out_degree", "clustering")


@dataclass(frozen=True)
class MetricCell:
    mean: float
    sd: float | None  # None when fewer than two graphs

    def render(self, digits: int = 2) -> str:
        if self.sd is None:
            return f"{self.mean:.{digits}f} ± n/a"
        return f"{self.mean:.{digits}f} ±{self.sd:.{digits}f}"


@dataclass(frozen=True)
class RoleMetricsSummary:
    n_graphs: int
    cells: dict[Role, dict[str, MetricCell]] = field(default_factory=dict)

    def rows(self) -> list[list[str]]:
        header = ["role", "in_degree", "out_degree", "clustering"]
        body = [[role.value] + [self.cells[role][m].render() for m in METRICS] for role in self.cells]
        return [header] + body

    def to_json(self) -> dict:
        return {
            "n_graphs": self.n_graphs,
            "roles": {
                role.value: {m: {"mean": c.mean, "sd": c.sd} for m, c in cells.items()}
                for role, cells in self.cells.items()
            },
        }


def graph_metrics(g: InteractionGraph) -> dict[Role, dict[str, float]]:
    deg = degrees(g)
    cc = clustering(g)
    return {r: {"in_degree": deg[r].in_degree, "out_degree": deg[r].out_degree,
                "clustering": cc[r]} for r in g.nodes}


def aggregate_by_role(graphs: Sequence[InteractionGraph]) -> RoleMetricsSummary:
    """Per-role mean and sample SD of each metric across sessions."""
    if not graphs:
        raise NoData("no graphs to aggregate")
    per_graph = [graph_metrics(g) for g in graphs]
    cells: dict[Role, dict[str, MetricCell]] = {}
    for role in Role:
        present = [m[role] for m in per_graph if role in m]
        if not present:
            continue
        cells[role] = {}
        for metric in METRICS:
            values = [float(p[metric]) for p in present]
            sd = statistics.stdev(values) if len(values) > 1 else None
            cells[role][metric] = MetricCell(statistics.fmean(values), sd)
    return RoleMetricsSummary(len(graphs), cells)


# -- exporters ---------------------------------------------------------------

def to_document(g: InteractionGraph) -> dict:
    """Canonical document; same shape the validator accepts from the model."""
    doc = {
        "format": GRAPH_FORMAT,
        "nodes": [r.value for r in g.nodes],
        "edges": [
            {
                "source": e.source.value,
                "target": e.target.value,
                "label": e.category.display,
                "description": e.description,
                "timestamp": e.timestamp,
                "rationale": e.rationale,
            }
            for e in g.edges
        ],
    }
    if g.duration is not None:
        doc["duration"] = g.duration
    return doc


def _dot_quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def to_dot(g: InteractionGraph) -> str:
    lines = ["digraph interaction {"]
    for r in g.nodes:
        lines.append(f"  {_dot_quote(r.value)};")
    for e in g.edges:
        attrs = (f"label={_dot_quote(e.category.display)}, "
                 f"tooltip={_dot_quote(e.description)}, "
                 f"timestamp={_dot_quote(e.timestamp)}")
        lines.append(f"  {_dot_quote(e.source.value)} -> {_dot_quote(e.target.value)} [{attrs}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


_GRAPHML_KEYS = (
    ("d0", "node", "role"),
    ("d1", "edge", "label"),
    ("d2", "edge", "timestamp"),
    ("d3", "edge", "rationale"),
    ("d4", "edge", "t"),
)


def to_graphml(g: InteractionGraph) -> str:
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        '<graphml xmlns="http://graphml.graphdrawing.org/xmlns" '
        'xmlns:xsi="http://www.w3.org/2001/XMLSchema-instance" '
        'xsi:schemaLocation="http://graphml.graphdrawing.org/xmlns '
        'http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd">',
    ]
    for key_id, domain, name in _GRAPHML_KEYS:
        attr_type = "int" if name == "t" else "string"
        out.append(f'  <key id="{key_id}" for="{domain}" attr.name="{name}" attr.type="{attr_type}"/>')
    out.append('  <graph id="interaction" edgedefault="directed">')
    for r in g.nodes:
        out.append(f"    <node id={quoteattr(r.value)}>")
        out.append(f'      <data key="d0">{escape(r.value)}</data>')
        out.append("    </node>")
    for i, e in enumerate(g.edges):
        out.append(f'    <edge id="e{i}" source={quoteattr(e.source.value)} '
                   f'target={quoteattr(e.target.value)}>')
        out.append(f'      <data key="d1">{escape(e.category.display)}</data>')
        out.append(f'      <data key="d2">{escape(e.timestamp)}</data>')
        out.append(f'      <data key="d3">{escape(e.rationale)}</data>')
        out.append(f'      <data key="d4">{e.t}</data>')
        out.append("    </edge>")
    out.append("  </graph>")
    out.append("</graphml>")
    return "\n".join(out) + "\n"


def export(g: InteractionGraph, fmt: str) -> bytes:
    if fmt in ("canonical-json", "json"):
        return (canonical_dumps(to_document(g)) + "\n").encode("utf-8")
    if fmt == "dot":
        return to_dot(g).encode("utf-8")
    if fmt == "graphml":
        return to_graphml(g).encode("utf-8")
    raise UnsupportedFormat(f"unknown export format {fmt!r}; expected one of {EXPORT_FORMATS}")

