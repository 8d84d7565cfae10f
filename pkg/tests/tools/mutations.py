"""Builds tests/data/mutations.json: one valid base network plus mutants.

Each mutant changes the base in one targeted way and names the single
safeguard error class it must raise. Controls are cosmetic rewrites that must
still be accepted. Run ``python3 tests/tools/mutations.py`` to regenerate.
"""

import copy
import json
from pathlib import Path

BASE = {
    "nodes": ["Surgeon", "Anesthesiologist", "Nurse"],
    "edges": [
        {"source": "Surgeon", "target": "Nurse", "label": "Communication and Teamwork",
         "description": "1:34:13 Surgeon calls the timeout and asks the nurse for help"},
        {"source": "Nurse", "target": "Surgeon", "label": "Situational Awareness",
         "description": "1:35:38 Nurse confirms help and blood are on the way"},
        {"source": "Anesthesiologist", "target": "Surgeon", "label": "Decision Making",
         "description": "1:37:09 Anesthesiologist gives a vasopressor for the falling pressure"},
    ],
}


def edit(fn):
    doc = copy.deepcopy(BASE)
    fn(doc)
    return doc


def set_edge(i, **fields):
    def fn(doc):
        doc["edges"][i].update(fields)
    return fn


def drop_edge_field(i, key):
    def fn(doc):
        del doc["edges"][i][key]
    return fn


def desc(i, text):
    return set_edge(i, description=text)


MUTANTS = [
    # schema
    ("missing-source", "SchemaViolation", drop_edge_field(0, "source")),
    ("missing-target", "SchemaViolation", drop_edge_field(1, "target")),
    ("missing-label", "SchemaViolation", drop_edge_field(2, "label")),
    ("missing-description", "SchemaViolation", drop_edge_field(0, "description")),
    ("numeric-source", "SchemaViolation", set_edge(0, source=1)),
    ("null-label", "SchemaViolation", set_edge(1, label=None)),
    ("list-description", "SchemaViolation", set_edge(2, description=["1:37:09", "x"])),
    ("edge-is-string", "SchemaViolation", lambda d: d["edges"].__setitem__(0, "Surgeon->Nurse")),
    ("edges-not-list", "SchemaViolation", lambda d: d.__setitem__("edges", {"0": d["edges"][0]})),
    ("nodes-not-list", "SchemaViolation", lambda d: d.__setitem__("nodes", "Surgeon,Nurse")),
    ("edges-key-missing", "SchemaViolation", lambda d: d.pop("edges")),
    ("node-without-label", "SchemaViolation", lambda d: d["nodes"].append({"weight": 3})),
    # roster coherence
    ("unknown-node", "RoleViolation", lambda d: d["nodes"].append("Technician")),
    ("named-node", "RoleViolation", lambda d: d["nodes"].__setitem__(0, "Dr. Smith")),
    ("unknown-source", "RoleViolation", set_edge(0, source="Technician")),
    ("unknown-target", "RoleViolation", set_edge(1, target="Patient")),
    ("empty-source", "RoleViolation", set_edge(2, source="")),
    ("qualified-role", "RoleViolation", set_edge(0, target="Scrub Nurse")),
    # self-edges
    ("self-edge-surgeon", "SelfEdgeViolation", set_edge(0, target="Surgeon")),
    ("self-edge-nurse", "SelfEdgeViolation", set_edge(1, source="Nurse", target="Nurse")),
    ("self-edge-case", "SelfEdgeViolation", set_edge(2, source="anesthesiologist",
                                                     target="ANESTHESIOLOGIST")),
    # categories
    ("technical-skill", "CategoryViolation", set_edge(0, label="Technical Skill")),
    ("partial-name", "CategoryViolation", set_edge(1, label="Teamwork")),
    ("suffixed-name", "CategoryViolation", set_edge(2, label="Leadership Skills")),
    ("truncated-name", "CategoryViolation", set_edge(0, label="Situational")),
    ("empty-label", "CategoryViolation", set_edge(1, label="")),
    # temporal consistency
    ("out-of-session", "TemporalViolation", desc(0, "9:59:59 Surgeon calls the timeout")),
    ("no-timestamp", "TemporalViolation", desc(1, "Nurse confirms help is coming")),
    ("minute-overflow", "TemporalViolation", desc(2, "1:61:00 vasopressor given")),
    ("far-from-entries", "TemporalViolation", desc(0, "0:00:10 Surgeon calls the timeout")),
    ("between-entries", "TemporalViolation", desc(1, "1:35:00 Nurse confirms help")),
    ("just-past-window", "TemporalViolation", desc(0, "1:34:44 Surgeon calls the timeout")),
    ("bad-explicit-timestamp", "TemporalViolation", set_edge(2, timestamp="soon")),
    ("all-edges-late", "TemporalViolation", lambda d: [e.update(description="1:50:00 late")
                                                       for e in d["edges"]]),
]

CONTROLS = [
    ("base", lambda d: None),
    ("ampersand-label", set_edge(0, label="communication & teamwork")),
    ("camel-label", set_edge(1, label="SituationalAwareness")),
    ("dict-nodes", lambda d: d.__setitem__("nodes", [{"id": n} for n in d["nodes"]])),
    ("padded-hours", desc(0, "01:34:13 Surgeon calls the timeout")),
    ("window-edge", desc(0, "1:34:43 exactly thirty seconds after the call")),
    ("explicit-timestamp", set_edge(2, timestamp="1:37:09")),
    ("parallel-edges", lambda d: d["edges"].append(copy.deepcopy(d["edges"][0]))),
]


def build() -> dict:
    return {
        "transcript": "fixture_transcript",
        "window_s": 30.0,
        "base": BASE,
        "mutants": [{"name": n, "expect": cls, "doc": edit(fn)} for n, cls, fn in MUTANTS],
        "controls": [{"name": n, "doc": edit(fn)} for n, fn in CONTROLS],
    }


if __name__ == "__main__":
    out = Path(__file__).resolve().parent.parent / "data" / "mutations.json"
    out.write_text(json.dumps(build(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
