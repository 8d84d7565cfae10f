"""Unified transcript: merge per-client streams, anonymize, render for the LLM."""

from __future__ import annotations

import logging
import re
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence, Union

from .archive import SessionArchive
from .core import SessionClock, SessionRoster, format_timestamp
from .errors import ArchiveIOError, ValidationFailure
from .jsonio import read_json, read_jsonl, write_json, write_jsonl

log = logging.getLogger(__name__)

REDACTED = "[REDACTED]"


class UnknownActor(ValidationFailure):
    pass


class ClippedWithWarning(UserWarning):
    """An entry fell outside the session and was clamped to its bounds."""


@dataclass(frozen=True)
class Utterance:
    t: float
    speaker: str
    text: str
    asr_confidence: float | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise ValidationFailure(f"empty utterance from {self.speaker} at t={self.t}")
        if self.asr_confidence is not None and not 0.0 <= self.asr_confidence <= 1.0:
            raise ValidationFailure(f"asr_confidence {self.asr_confidence} outside [0,1]")

    def render(self) -> str:
        return f"[{format_timestamp(self.t)}] {self.speaker}: {_one_line(self.text)}"

    def to_json(self) -> dict:
        return {"kind": "utterance", "t": self.t, "speaker": self.speaker, "text": self.text,
                "asr_confidence": self.asr_confidence}


@dataclass(frozen=True)
class ActionRecord:
    t: float
    actor: str
    description: str

    @property
    def speaker(self) -> str:
        return self.actor

    def render(self) -> str:
        return f"[{format_timestamp(self.t)}] {self.actor} *{_one_line(self.description)}*"

    def to_json(self) -> dict:
        return {"kind": "action", "t": self.t, "actor": self.actor, "description": self.description}


Entry = Union[Utterance, ActionRecord]


def _one_line(text: str) -> str:
    return " ".join(text.split())


@dataclass(frozen=True)
class UnifiedTranscript:
    clock: SessionClock
    roster: SessionRoster
    entries: tuple[Entry, ...] = ()
    session_id: int = 0
    warnings: tuple[str, ...] = field(default=(), compare=False)

    @property
    def times(self) -> list[float]:
        return [e.t for e in self.entries]


def _sort_key(roster: SessionRoster):
    return lambda e: (e.t, roster.order(e.speaker))


def _redactor(deny_list: Iterable[str]):
    tokens = sorted({t.strip() for t in deny_list if t and t.strip()}, key=len, reverse=True)
    if not tokens:
        return lambda s: s
    pattern = re.compile(r"(?<!\w)(?:" + "|".join(re.escape(t) for t in tokens) + r")(?!\w)",
                         re.IGNORECASE)
    return lambda s: pattern.sub(REDACTED, s)


def _entry_from_record(rec: dict, default_alias: str, redact) -> Entry | None:
    kind = rec.get("type") or rec.get("kind")
    if kind == "utterance":
        return Utterance(float(rec["t"]), rec.get("speaker", default_alias), redact(rec["text"]),
                         rec.get("asr_confidence"))
    if kind == "action":
        return ActionRecord(float(rec["t"]), rec.get("actor", default_alias),
                            redact(rec["description"]))
    return None  # gaze and other sensor records are archived but not transcribed


def merge_entries(clock: SessionClock, roster: SessionRoster, streams: Sequence[Iterable[Entry]],
                  session_id: int = 0) -> UnifiedTranscript:
    """Clamp, check attribution and sort; the core of ``merge_streams``."""
    aliases = set(roster.aliases)
    notes = []
    merged = []
    for stream in streams:
        for e in stream:
            if e.speaker not in aliases:
                raise UnknownActor(f"{e.speaker!r} is not in the session roster")
            if not clock.contains(e.t):
                clamped = min(max(e.t, 0.0), clock.duration)
                msg = f"{e.speaker} entry at t={e.t} clamped to {clamped}"
                warnings.warn(msg, ClippedWithWarning, stacklevel=3)
                log.warning(msg)
                notes.append(msg)
                e = replace(e, t=clamped)
            merged.append(e)
    merged.sort(key=_sort_key(roster))
    return UnifiedTranscript(clock, roster, tuple(merged), session_id, tuple(notes))


def merge_streams(archive: SessionArchive, deny_list: Iterable[str] = ()) -> UnifiedTranscript:
    redact = _redactor(deny_list)
    streams = []
    for entry in archive.roster.entries:
        records = archive.streams.get(entry.role, [])
        stream = [_entry_from_record(r, entry.display_alias, redact) for r in records]
        streams.append([e for e in stream if e is not None])
    return merge_entries(archive.clock, archive.roster, streams, archive.session_id)


def render_transcript_text(tr: UnifiedTranscript) -> str:
    return "\n".join(e.render() for e in tr.entries)


def filter_by_confidence(tr: UnifiedTranscript, threshold: float) -> UnifiedTranscript:
    """Drop utterances whose ASR confidence is below ``threshold``; actions stay."""
    kept = tuple(e for e in tr.entries
                 if not isinstance(e, Utterance) or e.asr_confidence is None
                 or e.asr_confidence >= threshold)
    return replace(tr, entries=kept)


def write_transcript(tr: UnifiedTranscript, directory: str | Path) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    write_json(d / "meta.json", {"session_id": tr.session_id, "clock": tr.clock.to_json(),
                                 "roster": tr.roster.to_json()})
    write_jsonl(d / "transcript.jsonl", (e.to_json() for e in tr.entries))
    (d / "transcript.txt").write_text(render_transcript_text(tr), encoding="utf-8")
    return d


def load_transcript(directory: str | Path) -> UnifiedTranscript:
    d = Path(directory)
    if not (d / "transcript.jsonl").is_file():
        raise ArchiveIOError(f"no transcript.jsonl in {d}")
    meta = read_json(d / "meta.json")
    entries = []
    for rec in read_jsonl(d / "transcript.jsonl"):
        if rec["kind"] == "utterance":
            entries.append(Utterance(rec["t"], rec["speaker"], rec["text"], rec.get("asr_confidence")))
        else:
            entries.append(ActionRecord(rec["t"], rec["actor"], rec["description"]))
    return UnifiedTranscript(SessionClock.from_json(meta["clock"]),
                             SessionRoster.from_json(meta["roster"]), tuple(entries),
                             int(meta.get("session_id", 0)))
