"""Agreement between model-derived edges and expert NOTSS annotations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from ..core import NotssCategory, Role, SessionClock, parse_timestamp
from ..errors import ValidationFailure
from ..graphs import InteractionGraph

DEFAULT_WINDOW_S = 10.0
CATEGORIES = tuple(NotssCategory)


class AgreementUndefined(ValidationFailure):
    pass


@dataclass(frozen=True)
class ExpertEdge:
    source: Role
    target: Role
    category: NotssCategory
    t: float


@dataclass(frozen=True)
class ExpertAnnotation:
    edges: tuple[ExpertEdge, ...]
    rater_id: str = ""

    @classmethod
    def from_json(cls, doc: dict, clock: SessionClock | None = None,
                  roles: Sequence[Role] | None = None) -> "ExpertAnnotation":
        edges = []
        for i, e in enumerate(doc.get("edges", [])):
            try:
                source, target = Role.parse(e["source"]), Role.parse(e["target"])
                category = NotssCategory.match(e["category"])
                raw_t = e["t"]
            except KeyError as exc:
                raise ValidationFailure(f"expert edge {i}: missing {exc}") from None
            if category is None:
                raise ValidationFailure(f"expert edge {i}: unknown category {e['category']!r}")
            t = float(parse_timestamp(raw_t)) if isinstance(raw_t, str) else float(raw_t)
            if roles is not None and (source not in roles or target not in roles):
                raise ValidationFailure(f"expert edge {i}: role not in roster")
            if clock is not None and not clock.contains(t):
                raise ValidationFailure(f"expert edge {i}: t={t} outside session")
            edges.append(ExpertEdge(source, target, category, t))
        return cls(tuple(edges), str(doc.get("rater_id", "")))


@dataclass(frozen=True)
class AgreementResult:
    percent_agreement: float
    kappa: float | None  # None when no pairs matched
    matched: int
    category_equal: int
    unmatched_llm: int
    unmatched_expert: int
    confusion: tuple[tuple[int, ...], ...]

    def to_json(self) -> dict:
        return {
            "percent_agreement": self.percent_agreement,
            "kappa": self.kappa,
            "matched": self.matched,
            "category_equal": self.category_equal,
            "unmatched_llm": self.unmatched_llm,
            "unmatched_expert": self.unmatched_expert,
            "categories": [c.value for c in CATEGORIES],
            "confusion": [list(r) for r in self.confusion],
        }


def cohen_kappa(confusion: Sequence[Sequence[int]]) -> float:
    """Cohen's kappa from a square confusion matrix (rows: rater A, cols: rater B).

    Observed agreement of 1 gives kappa 1, including the degenerate case where
    both raters used a single category.
    """
    n = len(confusion)
    total = sum(sum(row) for row in confusion)
    if total == 0:
        raise AgreementUndefined("no paired observations")
    observed = sum(confusion[i][i] for i in range(n)) / total
    if observed == 1.0:
        return 1.0
    rows = [sum(confusion[i]) for i in range(n)]
    cols = [sum(confusion[i][j] for i in range(n)) for j in range(n)]
    expected = sum(r * c for r, c in zip(rows, cols)) / (total * total)
    return (observed - expected) / (1.0 - expected)


def match_edges(llm: InteractionGraph, expert: ExpertAnnotation, window: float):
    """Greedy time-ordered matching on (source, target, |dt| <= window).

    Each model edge, in time order, takes the closest still-unmatched expert
    edge with the same endpoints (earliest wins ties).
    """
    pool = sorted(range(len(expert.edges)), key=lambda j: expert.edges[j].t)
    taken: set[int] = set()
    pairs = []
    unmatched_llm = 0
    for e in sorted(llm.edges, key=lambda e: e.t):
        best, best_dt = None, None
        for j in pool:
            x = expert.edges[j]
            if j in taken or x.source is not e.source or x.target is not e.target:
                continue
            dt = abs(x.t - e.t)
            if dt <= window and (best_dt is None or dt < best_dt):
                best, best_dt = j, dt
        if best is None:
            unmatched_llm += 1
        else:
            taken.add(best)
            pairs.append((e, expert.edges[best]))
    return pairs, unmatched_llm, len(expert.edges) - len(taken)


def agreement(llm: InteractionGraph, expert: ExpertAnnotation,
              window: float = DEFAULT_WINDOW_S) -> AgreementResult:
    if window <= 0:
        raise ValidationFailure("matching window must be positive")
    if not expert.edges:
        raise AgreementUndefined("expert annotation has no edges")
    pairs, unmatched_llm, unmatched_expert = match_edges(llm, expert, window)
    index = {c: i for i, c in enumerate(CATEGORIES)}
    confusion = [[0] * len(CATEGORIES) for _ in CATEGORIES]
    for model_edge, expert_edge in pairs:
        confusion[index[model_edge.category]][index[expert_edge.category]] += 1
    equal = sum(confusion[i][i] for i in range(len(CATEGORIES)))
    denom = len(pairs) + unmatched_llm + unmatched_expert
    kappa = cohen_kappa(confusion) if pairs else None
    return AgreementResult(
        percent_agreement=equal / denom,
        kappa=kappa,
        matched=len(pairs),
        category_equal=equal,
        unmatched_llm=unmatched_llm,
        unmatched_expert=unmatched_expert,
        confusion=tuple(tuple(r) for r in confusion),
    )
