"""Session debrief bundle: archive in, self-contained directory out."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path

from .archive import SessionArchive
from .errors import VortexError
from .graphs import export, graph_metrics
from .jsonio import write_json
from .nts import (AgreementUndefined, ExpertAnnotation, InferenceBackend, InferenceParams,
                  agreement, analyze_transcript, default_template, prompt_hash)
from .physiology import SYSTEM, ScenarioScript, builtin_scenario, events_from_log, replay
from .transcript import merge_streams, write_transcript

log = logging.getLogger(__name__)

BUNDLE_FORMAT = "vortex-bundle/1"


@dataclass
class ReportBundle:
    root: Path
    files: dict[str, str] = field(default_factory=dict)  # artifact -> path relative to root
    accepted: bool = True
    violations: list[str] = field(default_factory=list)

    def path(self, key: str) -> Path:
        return self.root / self.files[key]

    def manifest(self) -> dict:
        return {"format": BUNDLE_FORMAT, "files": dict(sorted(self.files.items())),
                "accepted": self.accepted, "violations": self.violations}


def metrics_table(rows: list[list[str]]) -> str:
    buf = io.StringIO()
    csv.writer(buf, delimiter="\t", lineterminator="\n").writerows(rows)
    return buf.getvalue()


def single_graph_rows(g) -> list[list[str]]:
    m = graph_metrics(g)
    rows = [["role", "in_degree", "out_degree", "clustering"]]
    for role, vals in m.items():
        rows.append([role.value, str(vals["in_degree"]), str(vals["out_degree"]),
                     f"{vals['clustering']:.2f}"])
    return rows


def _scenario_for(archive: SessionArchive) -> ScenarioScript | None:
    """The script the session ran; falls back to the bundled one of that name."""
    doc = archive.scenario or {}
    try:
        if "events" in doc:
            return ScenarioScript.from_json(doc)
        if doc.get("name"):
            return builtin_scenario(doc["name"])
    except VortexError as exc:
        log.warning("cannot rebuild scenario for the vitals figure: %s", exc)
    return None


def build_report(archive: SessionArchive, backend: InferenceBackend, out: str | Path, *,
                 expert: dict | None = None, params: InferenceParams | None = None,
                 salvage: bool = False, window: float = 30.0, agreement_window: float = 10.0,
                 deny_list=(), figures: bool = True, scenario: ScenarioScript | None = None
                 ) -> ReportBundle:
    root = Path(out)
    root.mkdir(parents=True, exist_ok=True)
    bundle = ReportBundle(root)
    files = bundle.files

    tr = merge_streams(archive, deny_list)
    write_transcript(tr, root / "transcript")
    files["transcript"] = "transcript/transcript.txt"
    files["transcript_jsonl"] = "transcript/transcript.jsonl"

    template = default_template()
    result = analyze_transcript(tr, backend, params, salvage=salvage, window=window,
                                template=template)
    bundle.accepted = result.report.accepted
    bundle.violations = [str(e) for e in result.report.errors]
    g = result.graph
    (root / "llm").mkdir(exist_ok=True)
    (root / "llm" / "prompt.txt").write_text(result.prompt, encoding="utf-8")
    (root / "llm" / "completion.txt").write_text(result.completion, encoding="utf-8")
    files["prompt"] = "llm/prompt.txt"
    files["completion"] = "llm/completion.txt"

    for key, name, fmt in (("graph", "graph.json", "canonical-json"), ("dot", "graph.dot", "dot"),
                           ("graphml", "graph.graphml", "graphml")):
        (root / name).write_bytes(export(g, fmt))
        files[key] = name
    (root / "metrics.tsv").write_text(metrics_table(single_graph_rows(g)), encoding="utf-8")
    files["metrics"] = "metrics.tsv"

    if expert is not None:
        annotation = ExpertAnnotation.from_json(expert, tr.clock, tr.roster.roles)
        try:
            doc = agreement(g, annotation, agreement_window).to_json()
        except AgreementUndefined as exc:
            doc = {"error": str(exc)}
        write_json(root / "agreement.json", doc)
        files["agreement"] = "agreement.json"

    if figures:
        from . import plotting

        plotting.plot_interaction_graph(g, root / "figures" / "graph.png")
        plotting.plot_degrees(g, root / "figures" / "degrees.png")
        files["fig_graph"] = "figures/graph.png"
        files["fig_degrees"] = "figures/degrees.png"
        script = scenario or _scenario_for(archive)
        if script is not None:
            try:
                interventions = events_from_log(e for e in archive.event_log
                                                if e.get("actor") != SYSTEM)
                traj = replay(script, interventions, until=min(script.duration,
                                                                archive.clock.duration))
                scripted = [e for e in archive.event_log if e.get("actor") == SYSTEM]
                plotting.plot_vitals(traj, root / "figures" / "vitals.png", scripted)
                files["fig_vitals"] = "figures/vitals.png"
            except Exception as exc:  # figures are a convenience; never fail the bundle
                log.warning("vitals replay skipped: %s", exc)

    write_json(root / "bundle.json", {
        **bundle.manifest(),
        "session_id": archive.session_id,
        "template": template.version,
        "prompt_sha256": prompt_hash(result.prompt),
        "params": (params or InferenceParams()).to_request(),
        "incomplete": archive.incomplete,
    })
    return bundle
