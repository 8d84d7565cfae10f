"""SessionArchive: what a finished session hands to the feedback engine.

On-disk layout (one directory per session)::

    session.json          clock, scenario, completeness markers, server metrics
    roster.json           anonymized roster
    events.json           authoritative event log (session-relative times)
    streams/<role>.jsonl  per-client records: utterance, action, gaze
    rtt.json              per-client round-trip summary
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .core import Role, SessionClock, SessionRoster
from .errors import ArchiveIOError
from .jsonio import read_json, read_jsonl, write_json, write_jsonl

ARCHIVE_FORMAT = "vortex-archive/1"


@dataclass
class SessionArchive:
    session_id: int
    roster: SessionRoster
    clock: SessionClock
    event_log: list[dict] = field(default_factory=list)
    streams: dict[Role, list[dict]] = field(default_factory=dict)
    rtt_stats: dict[str, dict] = field(default_factory=dict)
    incomplete: list[str] = field(default_factory=list)
    scenario: dict | None = None
    metrics: dict[str, Any] = field(default_factory=dict)

    def write(self, directory: str | Path) -> Path:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        write_json(d / "session.json", {
            "format": ARCHIVE_FORMAT,
            "session_id": self.session_id,
            "clock": self.clock.to_json(),
            "incomplete": sorted(self.incomplete),
            "scenario": self.scenario,
            "metrics": self.metrics,
        })
        write_json(d / "roster.json", self.roster.to_json())
        write_json(d / "events.json", self.event_log)
        write_json(d / "rtt.json", self.rtt_stats)
        for role, records in self.streams.items():
            write_jsonl(d / "streams" / f"{role.value}.jsonl", records)
        return d

    @classmethod
    def load(cls, directory: str | Path) -> "SessionArchive":
        d = Path(directory)
        if not d.is_dir():
            raise ArchiveIOError(f"session archive not found: {d}")
        meta = read_json(d / "session.json")
        roster = SessionRoster.from_json(read_json(d / "roster.json"))
        streams = {}
        for entry in roster.entries:
            path = d / "streams" / f"{entry.role.value}.jsonl"
            streams[entry.role] = read_jsonl(path) if path.exists() else []
        rtt_path = d / "rtt.json"
        events_path = d / "events.json"
        return cls(
            session_id=int(meta["session_id"]),
            roster=roster,
            clock=SessionClock.from_json(meta["clock"]),
            event_log=read_json(events_path) if events_path.exists() else [],
            streams=streams,
            rtt_stats=read_json(rtt_path) if rtt_path.exists() else {},
            incomplete=list(meta.get("incomplete", [])),
            scenario=meta.get("scenario"),
            metrics=meta.get("metrics", {}),
        )
