"""Questionnaire analytics: Likert descriptives, SUS scoring, Pearson r."""

from __future__ import annotations

import csv
import math
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .errors import (ArchiveIOError, ArityError, InvalidResponse, NoData,
                     UndefinedCorrelation)
from .jsonio import read_json

ITEMS = tuple(f"Q{i}" for i in range(1, 14))
SUS_ITEMS = ITEMS[:10]
NTS_ITEMS = ITEMS[10:]


@dataclass(frozen=True)
class ItemSummary:
    item: str
    n: int
    mean: float
    sd: float
    median: int

    def render(self) -> str:
        return format_mean_sd(self.mean, self.sd)


@dataclass(frozen=True)
class ParticipantProfile:
    age_band: str
    years_in_practice: float
    prior_simulation: bool
    prior_vr: bool

    def __post_init__(self):
        if self.years_in_practice < 0:
            raise InvalidResponse("years_in_practice must be >= 0")


@dataclass
class LikertResponseSet:
    items: tuple[str, ...]
    rows: list[dict[str, int]]
    participants: list[str]
    extra: list[dict[str, str]]  # non-item columns, e.g. profile fields

    def __post_init__(self):
        for pid, row in zip(self.participants, self.rows):
            for item, value in row.items():
                if not isinstance(value, int) or not 1 <= value <= 5:
                    raise InvalidResponse(f"{pid} {item}: {value!r} is not a 1..5 response")

    def column(self, name: str) -> list[float]:
        if name in self.items:
            return [float(r[name]) for r in self.rows]
        if name == "SUS":
            return [sus_score([r[q] for q in SUS_ITEMS]) for r in self.rows]
        try:
            return [float(_coerce(e[name])) for e in self.extra]
        except KeyError:
            raise ArityError(f"no column named {name!r}") from None
        except ValueError as exc:
            raise InvalidResponse(f"column {name!r} is not numeric: {exc}") from None

    def profiles(self) -> list[ParticipantProfile]:
        return [
            ParticipantProfile(
                age_band=e.get("age_band", ""),
                years_in_practice=float(e.get("years_in_practice") or 0),
                prior_simulation=_truthy(e.get("prior_simulation", "")),
                prior_vr=_truthy(e.get("prior_vr", "")),
            )
            for e in self.extra
        ]


def _truthy(text: str) -> bool:
    return str(text).strip().lower() in ("1", "true", "yes", "y")


def _coerce(text: str) -> float:
    t = str(text).strip().lower()
    if t in ("true", "yes", "y"):
        return 1.0
    if t in ("false", "no", "n"):
        return 0.0
    return float(t)


def load_responses(path: str | Path) -> LikertResponseSet:
    """Read a questionnaire CSV (``participant_id``, ``Q1``..``Q13``, profile columns)."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            header = reader.fieldnames or []
            records = list(reader)
    except OSError as exc:
        raise ArchiveIOError(f"cannot read {path}: {exc.strerror or exc}") from exc
    items = tuple(q for q in ITEMS if q in header)
    if not items:
        raise InvalidResponse(f"{path}: no Q1..Q13 columns")
    rows, pids, extra = [], [], []
    for n, rec in enumerate(records, 1):
        row = {}
        for q in items:
            try:
                row[q] = int(rec[q])
            except (TypeError, ValueError):
                raise InvalidResponse(f"row {n} {q}: {rec[q]!r} is not an integer") from None
        rows.append(row)
        pids.append(rec.get("participant_id") or f"P{n}")
        extra.append({k: v for k, v in rec.items() if k not in items and k != "participant_id"})
    return LikertResponseSet(items, rows, pids, extra)


def format_mean_sd(mean: float, sd: float | None, digits: int = 2) -> str:
    if sd is None:
        return f"{mean:.{digits}f} ± n/a"
    return f"{mean:.{digits}f} ± {sd:.{digits}f}"


def likert_descriptives(rs: LikertResponseSet) -> dict[str, ItemSummary]:
    if not rs.rows:
        raise NoData("no responses")
    out = {}
    for item in rs.items:
        values = [row[item] for row in rs.rows]
        sd = statistics.stdev(values) if len(values) > 1 else 0.0
        out[item] = ItemSummary(item, len(values), statistics.fmean(values), sd,
                                statistics.median_low(values))
    return out


def sus_score(responses: Sequence[int]) -> float:
    """System Usability Scale composite (0..100) for one participant."""
    if len(responses) != 10:
        raise InvalidResponse(f"SUS needs 10 responses, got {len(responses)}")
    total = 0
    for i, r in enumerate(responses):
        if isinstance(r, bool) or not isinstance(r, int) or not 1 <= r <= 5:
            raise InvalidResponse(f"Q{i + 1}: {r!r} is not a 1..5 response")
        # items are 1-based: Q1, Q3, ... are positively worded
        total += (r - 1) if i % 2 == 0 else (5 - r)
    return 2.5 * total


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    if len(x) != len(y):
        raise ArityError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise ArityError("need at least two observations")
    mx = math.fsum(x) / len(x)
    my = math.fsum(y) / len(y)
    dx = [a - mx for a in x]
    dy = [b - my for b in y]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelation("constant input")
    sxy = math.fsum(a * b for a, b in zip(dx, dy))
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def item_texts() -> dict[str, str]:
    """Questionnaire wording, used to label report tables and figures."""
    return read_json(Path(__file__).parent / "data" / "questionnaire_items.json")
