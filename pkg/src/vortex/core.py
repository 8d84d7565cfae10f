"""Shared domain vocabulary: roles, NOTSS categories, session clock and roster."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field
from typing import Iterable

from .errors import ParseError, RangeError, RosterError

MAX_CLOCK_SECONDS = 359_999  # 99:59:59

_TIMESTAMP_RE = re.compile(r"^(\d{1,2}):(\d{2}):(\d{2})$")


class Role(str, enum.Enum):
    """Team roles. Declaration order is the canonical roster order."""

    SURGEON = "Surgeon"
    ANESTHESIOLOGIST = "Anesthesiologist"
    NURSE = "Nurse"

    @property
    def rank(self) -> int:
        return _ROLE_ORDER[self]

    @classmethod
    def parse(cls, text: str) -> "Role":
        if isinstance(text, Role):
            return text
        key = str(text).strip().lower()
        for role in cls:
            if key in (role.value.lower(), role.name.lower()):
                return role
        raise RosterError(f"unknown role {text!r}")


_ROLE_ORDER = {role: i for i, role in enumerate(Role)}


class NotssCategory(str, enum.Enum):
    SITUATIONAL_AWARENESS = "SituationalAwareness"
    DECISION_MAKING = "DecisionMaking"
    COMMUNICATION_TEAMWORK = "CommunicationTeamwork"
    LEADERSHIP = "Leadership"

    @property
    def display(self) -> str:
        return _CATEGORY_DISPLAY[self]

    @classmethod
    def match(cls, text: str) -> "NotssCategory | None":
        """Case and punctuation insensitive lookup; ``None`` when nothing matches."""
        return _CATEGORY_KEYS.get(_category_key(text))


_CATEGORY_DISPLAY = {
    NotssCategory.SITUATIONAL_AWARENESS: "Situational Awareness",
    NotssCategory.DECISION_MAKING: "Decision Making",
    NotssCategory.COMMUNICATION_TEAMWORK: "Communication and Teamwork",
    NotssCategory.LEADERSHIP: "Leadership",
}


def _category_key(text: str) -> str:
    text = str(text).lower().replace("&", "and")
    return re.sub(r"[^a-z]", "", text)


_CATEGORY_KEYS: dict[str, NotssCategory] = {}
for _cat in NotssCategory:
    _CATEGORY_KEYS[_category_key(_cat.value)] = _cat
    _CATEGORY_KEYS[_category_key(_cat.display)] = _cat


def parse_timestamp(text: str) -> int:
    """Parse ``H:MM:SS`` or ``HH:MM:SS`` into seconds."""
    m = _TIMESTAMP_RE.match(str(text).strip())
    if m is None:
        raise ParseError(f"not a H:MM:SS timestamp: {text!r}")
    hours, minutes, seconds = (int(g) for g in m.groups())
    if minutes >= 60 or seconds >= 60:
        raise RangeError(f"minute/second field out of range in {text!r}")
    return 3600 * hours + 60 * minutes + seconds


def format_timestamp(seconds: float) -> str:
    """Render seconds as canonical ``H:MM:SS``; fractional seconds are truncated."""
    whole = int(seconds)
    if whole < 0 or whole > MAX_CLOCK_SECONDS:
        raise RangeError(f"{seconds} s is outside the clock range")
    hours, rem = divmod(whole, 3600)
    minutes, secs = divmod(rem, 60)
    return f"{hours}:{minutes:02d}:{secs:02d}"


@dataclass(frozen=True)
class SessionClock:
    session_start: int  # wall clock, microseconds
    duration: float  # seconds

    def __post_init__(self):
        if not self.duration > 0:
            raise RangeError("session duration must be positive")

    def contains(self, t: float) -> bool:
        return 0.0 <= t <= self.duration

    def to_json(self) -> dict:
        return {"session_start": self.session_start, "duration": self.duration}

    @classmethod
    def from_json(cls, doc: dict) -> "SessionClock":
        return cls(int(doc["session_start"]), float(doc["duration"]))


@dataclass(frozen=True)
class RosterEntry:
    client_id: int
    role: Role

    @property
    def display_alias(self) -> str:
        # Roles are unique per session, so the role name is a sufficient alias.
        return self.role.value


@dataclass(frozen=True)
class SessionRoster:
    entries: tuple[RosterEntry, ...] = field(default_factory=tuple)

    def __post_init__(self):
        ids = [e.client_id for e in self.entries]
        roles = [e.role for e in self.entries]
        if len(set(ids)) != len(ids):
            raise RosterError("duplicate client_id in roster")
        if len(set(roles)) != len(roles):
            raise RosterError("duplicate role in roster")
        # canonical order makes tie-breaks independent of join order
        ordered = tuple(sorted(self.entries, key=lambda e: e.role.rank))
        object.__setattr__(self, "entries", ordered)

    @classmethod
    def of(cls, pairs: Iterable[tuple[int, Role | str]]) -> "SessionRoster":
        return cls(tuple(RosterEntry(int(cid), Role.parse(r) if isinstance(r, str) else r)
                         for cid, r in pairs))

    @classmethod
    def full(cls) -> "SessionRoster":
        return cls.of((i + 1, role) for i, role in enumerate(Role))

    def with_entry(self, entry: RosterEntry) -> "SessionRoster":
        return SessionRoster(self.entries + (entry,))

    @property
    def roles(self) -> tuple[Role, ...]:
        return tuple(e.role for e in self.entries)

    @property
    def aliases(self) -> tuple[str, ...]:
        return tuple(e.display_alias for e in self.entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, role: object) -> bool:
        return role in self.roles

    def by_client(self, client_id: int) -> RosterEntry | None:
        for e in self.entries:
            if e.client_id == client_id:
                return e
        return None

    def by_role(self, role: Role) -> RosterEntry | None:
        for e in self.entries:
            if e.role is role:
                return e
        return None

    def resolve(self, label: str) -> Role | None:
        """Map a free-text participant label to a rostered role, else ``None``."""
        try:
            role = Role.parse(label)
        except RosterError:
            return None
        return role if role in self else None

    def order(self, alias: str) -> int:
        for i, e in enumerate(self.entries):
            if e.display_alias == alias:
                return i
        raise RosterError(f"{alias!r} is not in the roster")

    def to_json(self) -> list[dict]:
        return [{"client_id": e.client_id, "role": e.role.value, "display_alias": e.display_alias}
                for e in self.entries]

    @classmethod
    def from_json(cls, doc: list[dict]) -> "SessionRoster":
        return cls.of((d["client_id"], d["role"]) for d in doc)
