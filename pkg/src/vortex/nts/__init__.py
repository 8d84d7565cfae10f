"""Feedback-engine LLM stage: prompt, inference, extraction, safeguards, agreement."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from ..graphs import InteractionGraph
from ..transcript import UnifiedTranscript, filter_by_confidence, render_transcript_text
from .agreement import (AgreementResult, AgreementUndefined, ExpertAnnotation, agreement,
                        cohen_kappa)
from .backends import (BackendTimeout, BackendUnavailable, HttpBackend, InferenceBackend,
                       InferenceParams, MockBackend, make_backend, prompt_hash, run_inference)
from .extract import CandidateGraphDoc, NoStructuredOutput, SchemaMiss, extract_graph_json
from .prompt import PromptTemplate, build_prompt, default_template
from .validate import (CategoryViolation, GraphRejected, RoleViolation, SafeguardViolation,
                       SchemaViolation, SelfEdgeViolation, TemporalViolation, ValidationReport,
                       check_graph, graph_from_document, validate_graph)


@dataclass
class AnalysisResult:
    prompt: str
    completion: str
    report: ValidationReport

    @property
    def graph(self) -> InteractionGraph:
        return self.report.graph


def analyze_transcript(tr: UnifiedTranscript, backend: InferenceBackend,
                       params: InferenceParams | None = None, *, salvage: bool = False,
                       window: float = 30.0, template: PromptTemplate | None = None
                       ) -> AnalysisResult:
    """Transcript to validated graph. Raises GraphRejected unless ``salvage``."""
    prompt = build_prompt(render_transcript_text(tr), template)
    completion = run_inference(prompt, params or InferenceParams(), backend)
    doc = extract_graph_json(completion)
    report = check_graph(doc, tr.roster, tr, window=window)
    if report.errors and not salvage:
        raise GraphRejected(report.errors)
    return AnalysisResult(prompt, completion, report)


def sensitivity_sweep(tr: UnifiedTranscript, backend: InferenceBackend,
                      thresholds: Iterable[float], *,
                      templates: Sequence[PromptTemplate] | None = None,
                      expert: ExpertAnnotation | None = None,
                      params: InferenceParams | None = None,
                      window: float = 30.0, agreement_window: float = 10.0) -> list[dict]:
    """Re-run the pipeline per (ASR-confidence threshold, prompt variant).

    Purely empirical: rows are reported as observed, no trend is assumed.
    """
    rows = []
    for template in templates or [default_template()]:
        for threshold in thresholds:
            sub = filter_by_confidence(tr, threshold)
            row = {"template": template.version, "threshold": threshold,
                   "entries": len(sub.entries)}
            try:
                result = analyze_transcript(sub, backend, params, salvage=True, window=window,
                                            template=template)
            except (NoStructuredOutput, SchemaMiss) as exc:
                row.update(edges=0, violations=None, error=type(exc).__name__)
                rows.append(row)
                continue
            row.update(edges=len(result.graph.edges), violations=len(result.report.errors))
            if expert is not None:
                try:
                    agr = agreement(result.graph, expert, agreement_window)
                    row.update(percent_agreement=agr.percent_agreement, kappa=agr.kappa)
                except AgreementUndefined:
                    row.update(percent_agreement=None, kappa=None)
            rows.append(row)
    return rows


__all__ = [
    "AgreementResult", "AgreementUndefined", "AnalysisResult", "BackendTimeout",
    "BackendUnavailable", "CandidateGraphDoc", "CategoryViolation", "ExpertAnnotation",
    "GraphRejected", "HttpBackend", "InferenceBackend", "InferenceParams", "MockBackend",
    "NoStructuredOutput", "PromptTemplate", "RoleViolation", "SafeguardViolation", "SchemaMiss",
    "SchemaViolation", "SelfEdgeViolation", "TemporalViolation", "ValidationReport",
    "agreement", "analyze_transcript", "build_prompt", "check_graph", "cohen_kappa",
    "default_template", "extract_graph_json", "graph_from_document", "make_backend",
    "prompt_hash", "run_inference", "sensitivity_sweep", "validate_graph",
]
