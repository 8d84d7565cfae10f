"""Pull the interaction-network JSON out of a raw reasoning-model completion."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from ..errors import ValidationFailure

THINK_CLOSE = "</think>"


class NoStructuredOutput(ValidationFailure):
    pass


class SchemaMiss(ValidationFailure):
    def __init__(self, message: str, location: int):
        super().__init__(message)
        self.location = location


@dataclass
class CandidateGraphDoc:
    nodes: list = field(default_factory=list)
    edges: list = field(default_factory=list)
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_json(cls, doc: dict) -> "CandidateGraphDoc":
        return cls(doc.get("nodes"), doc.get("edges"), doc)


def strip_think(raw: str) -> str:
    idx = raw.find(THINK_CLOSE)
    return raw if idx < 0 else raw[idx + len(THINK_CLOSE):]


def _find_network(obj):
    if isinstance(obj, dict):
        if "nodes" in obj and "edges" in obj:
            return obj
        children = obj.values()
    elif isinstance(obj, list):
        children = obj
    else:
        return None
    for child in children:
        found = _find_network(child)
        if found is not None:
            return found
    return None


def extract_graph_json(raw: str) -> CandidateGraphDoc:
    text = strip_think(raw)
    base = len(raw) - len(text)
    decoder = json.JSONDecoder()
    first_json = None
    pos = text.find("{")
    while pos >= 0:
        try:
            obj, end = decoder.raw_decode(text, pos)
        except json.JSONDecodeError:
            pos = text.find("{", pos + 1)
            continue
        found = _find_network(obj)
        if found is not None:
            return CandidateGraphDoc.from_json(found)
        if first_json is None:
            first_json = pos
        pos = text.find("{", end)
    if first_json is not None:
        loc = base + first_json
        raise SchemaMiss(f"JSON at offset {loc} has no 'nodes'/'edges' keys", loc)
    raise NoStructuredOutput("no JSON object in completion")
