"""Safeguards applied to a candidate interaction network.

1. schema: required fields with the right types
2. temporal consistency: edge timestamps land on or near transcript entries
3. coherence: participant labels match the session roster; no self-edges
"""

from __future__ import annotations

import bisect
import logging
import re
from dataclasses import dataclass, field

from ..core import NotssCategory, ParseError, RangeError, Role, SessionRoster, parse_timestamp
from ..errors import ValidationFailure
from ..graphs import InteractionEdge, InteractionGraph
from ..transcript import UnifiedTranscript
from .extract import CandidateGraphDoc

log = logging.getLogger(__name__)

DEFAULT_WINDOW_S = 30.0
REQUIRED_EDGE_FIELDS = ("source", "target", "label", "description")

_TS_IN_TEXT = re.compile(r"(?<![\d:])(\d{1,2}:\d{2}:\d{2})(?![\d:])")
_RATIONALE_TRIM = " \t,;:-–—()[]"


class SafeguardViolation(ValidationFailure):
    def __init__(self, message: str, edge_index: int | None = None):
        where = "document" if edge_index is None else f"edge {edge_index}"
        super().__init__(f"{where}: {message}")
        self.edge_index = edge_index


class SchemaViolation(SafeguardViolation):
    pass


class TemporalViolation(SafeguardViolation):
    pass


class RoleViolation(SafeguardViolation):
    pass


class SelfEdgeViolation(RoleViolation):
    pass


class CategoryViolation(SafeguardViolation):
    pass


class GraphRejected(ValidationFailure):
    def __init__(self, errors: list[SafeguardViolation]):
        lines = "; ".join(str(e) for e in errors)
        super().__init__(f"interaction graph rejected ({len(errors)} violation(s)): {lines}")
        self.errors = errors


@dataclass
class ValidationReport:
    graph: InteractionGraph
    errors: list[SafeguardViolation] = field(default_factory=list)

    @property
    def accepted(self) -> bool:
        return not self.errors


def _node_label(node) -> str | None:
    if isinstance(node, str):
        return node
    if isinstance(node, dict):
        for key in ("id", "label", "name"):
            if isinstance(node.get(key), str):
                return node[key]
    return None


def _edge_time(edge: dict, index: int) -> int:
    explicit = edge.get("timestamp")
    if isinstance(explicit, str):
        text = explicit
    else:
        m = _TS_IN_TEXT.search(edge["description"])
        if m is None:
            raise TemporalViolation("description carries no H:MM:SS timestamp", index)
        text = m.group(1)
    try:
        return parse_timestamp(text)
    except (ParseError, RangeError) as exc:
        raise TemporalViolation(str(exc), index) from None


def _edge_rationale(edge: dict) -> str:
    if isinstance(edge.get("rationale"), str):
        return edge["rationale"]
    text = _TS_IN_TEXT.sub("", edge["description"], count=1)
    return text.strip(_RATIONALE_TRIM).strip()


class _SpanIndex:
    def __init__(self, times: list[float]):
        self.times = sorted(times)

    def distance(self, t: float) -> float:
        if not self.times:
            return float("inf")
        i = bisect.bisect_left(self.times, t)
        best = float("inf")
        for j in (i - 1, i):
            if 0 <= j < len(self.times):
                best = min(best, abs(self.times[j] - t))
        return best


def check_graph(doc: CandidateGraphDoc | dict, roster: SessionRoster,
                tr: UnifiedTranscript | None = None, *, window: float = DEFAULT_WINDOW_S,
                duration: float | None = None) -> ValidationReport:
    """Run every safeguard; returns the graph of passing edges plus all violations."""
    if isinstance(doc, CandidateGraphDoc):
        nodes, edges = doc.nodes, doc.edges
    elif isinstance(doc, dict):
        nodes, edges = doc.get("nodes"), doc.get("edges")
    else:
        raise SchemaViolation("graph document must be a JSON object")
    if duration is None and tr is not None:
        duration = tr.clock.duration
    spans = _SpanIndex(tr.times) if tr is not None else None

    errors: list[SafeguardViolation] = []
    if not isinstance(nodes, list):
        errors.append(SchemaViolation("'nodes' must be a list"))
        nodes = []
    if not isinstance(edges, list):
        errors.append(SchemaViolation("'edges' must be a list"))
        edges = []
    for node in nodes:
        label = _node_label(node)
        if label is None:
            errors.append(SchemaViolation(f"node {node!r} has no label"))
        elif roster.resolve(label) is None:
            errors.append(RoleViolation(f"node {label!r} is not in the session roster"))

    accepted: list[InteractionEdge] = []
    for i, edge in enumerate(edges):
        if not isinstance(edge, dict):
            errors.append(SchemaViolation("edge must be an object", i))
            continue
        missing = [f for f in REQUIRED_EDGE_FIELDS if not isinstance(edge.get(f), str)]
        if missing:
            errors.append(SchemaViolation(f"missing or non-text field(s) {missing}", i))
            continue
        edge_errors: list[SafeguardViolation] = []
        source = roster.resolve(edge["source"])
        target = roster.resolve(edge["target"])
        for end, role in (("source", source), ("target", target)):
            if role is None:
                edge_errors.append(RoleViolation(f"{end} {edge[end]!r} is not in the session roster", i))
        if source is not None and source is target:
            edge_errors.append(SelfEdgeViolation(f"self-edge on {source.value}", i))
        category = NotssCategory.match(edge["label"])
        if category is None:
            edge_errors.append(CategoryViolation(f"{edge['label']!r} is not a NOTSS category", i))
        t = None
        try:
            t = _edge_time(edge, i)
        except TemporalViolation as exc:
            edge_errors.append(exc)
        if t is not None:
            if duration is not None and not 0 <= t <= duration:
                edge_errors.append(TemporalViolation(f"t={t}s outside session [0, {duration}]", i))
            elif spans is not None and spans.distance(t) > window:
                edge_errors.append(TemporalViolation(
                    f"t={t}s is more than {window}s from any transcript entry", i))
        if edge_errors:
            errors.extend(edge_errors)
            continue
        accepted.append(InteractionEdge(source, target, category, t, _edge_rationale(edge)))

    graph = InteractionGraph(roster.roles, tuple(accepted), duration)
    return ValidationReport(graph, errors)


def validate_graph(doc: CandidateGraphDoc | dict, roster: SessionRoster,
                   tr: UnifiedTranscript | None = None, *, window: float = DEFAULT_WINDOW_S,
                   salvage: bool = False, duration: float | None = None) -> InteractionGraph:
    """Accept the whole document or raise :class:`GraphRejected`.

    With ``salvage`` the violating edges are dropped (and logged) instead.
    """
    report = check_graph(doc, roster, tr, window=window, duration=duration)
    if report.errors:
        if not salvage:
            raise GraphRejected(report.errors)
        for err in report.errors:
            log.warning("salvage: dropped %s", err)
    return report.graph


def graph_from_document(doc: dict) -> InteractionGraph:
    """Load a canonical graph export (no transcript at hand: range check only)."""
    if not isinstance(doc, dict) or not isinstance(doc.get("nodes"), list):
        raise SchemaViolation("not a graph document")
    roles = []
    for node in doc["nodes"]:
        label = _node_label(node)
        try:
            role = Role.parse(label or "")
        except ValidationFailure:
            raise RoleViolation(f"node {label!r} is not a team role") from None
        if role not in roles:
            roles.append(role)
    roster = SessionRoster.of((i + 1, r) for i, r in enumerate(roles))
    duration = doc.get("duration")
    return validate_graph(doc, roster, None, duration=float(duration) if duration is not None else None)
