"""Wire formats for the hybrid transport.

Reliable channel (stream): a 4-byte big-endian length followed by a canonical
UTF-8 JSON envelope ``{"msg_type", "payload", "seq", "session_id"}``.

Lossy channel (datagrams): fixed 117-byte big-endian pose record::

    offset size field
    0      4    magic "VRTX"
    4      1    version (1)
    5      4    client_id   u32
    9      4    seq         u32
    13     8    t_us        u64, sender-local microseconds
    21     28   head        3 x f32 position (m) + 4 x f32 quaternion (x, y, z, w)
    49     28   hand_left   same layout
    77     28   hand_right  same layout
    105    12   gaze        3 x f32 unit vector
"""

from __future__ import annotations

import enum
import json
import math
import struct
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .errors import ProtocolError, ValidationFailure
from .jsonio import canonical_bytes

MAX_FRAME = 1 << 20  # 1 MiB body limit
U64_MAX = (1 << 64) - 1
U32_MAX = (1 << 32) - 1

_LEN = struct.Struct(">I")


class MsgType(str, enum.Enum):
    JOIN = "Join"
    JOIN_ACK = "JoinAck"
    STATE_SNAPSHOT = "StateSnapshot"
    EVENT = "Event"
    TIME_SYNC_REQ = "TimeSyncReq"
    TIME_SYNC_RESP = "TimeSyncResp"
    TRANSCRIPT_UPLOAD = "TranscriptUpload"
    SESSION_END = "SessionEnd"


class FrameTooLarge(ProtocolError):
    pass


class FramingError(ProtocolError):
    pass


class DecodeError(ProtocolError):
    pass


class PoseError(ProtocolError):
    pass


class NotAPose(PoseError):
    pass


class TruncatedDatagram(PoseError):
    pass


class DatagramLengthError(PoseError):
    pass


class UnknownVersion(PoseError):
    pass


class PoseValidationError(PoseError):
    pass


class NoSamples(ValidationFailure):
    pass


# -- reliable frames ---------------------------------------------------------

@dataclass(frozen=True)
class ReliableEnvelope:
    msg_type: MsgType
    session_id: int
    seq: int
    payload: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "msg_type", MsgType(self.msg_type))
        for name in ("session_id", "seq"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v <= U64_MAX:
                raise DecodeError(f"{name} must be an unsigned 64-bit integer, got {v!r}")
        if not isinstance(self.payload, dict):
            raise DecodeError("payload must be a JSON object")

    def to_json(self) -> dict:
        return {"msg_type": self.msg_type.value, "session_id": self.session_id,
                "seq": self.seq, "payload": self.payload}


def encode_frame(env: ReliableEnvelope) -> bytes:
    try:
        body = canonical_bytes(env.to_json())
    except (TypeError, ValueError) as exc:
        raise DecodeError(f"payload not serializable: {exc}") from exc
    if len(body) > MAX_FRAME:
        raise FrameTooLarge(f"frame body of {len(body)} bytes exceeds {MAX_FRAME}")
    return _LEN.pack(len(body)) + body


def _decode_body(body: bytes) -> ReliableEnvelope:
    try:
        doc = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        raise DecodeError(f"frame body is not UTF-8 JSON: {exc}") from None
    if not isinstance(doc, dict) or set(doc) != {"msg_type", "session_id", "seq", "payload"}:
        raise DecodeError("envelope must have exactly msg_type, session_id, seq, payload")
    try:
        return ReliableEnvelope(doc["msg_type"], doc["session_id"], doc["seq"], doc["payload"])
    except ValueError as exc:
        raise DecodeError(str(exc)) from None


def decode_frame(data: bytes) -> ReliableEnvelope:
    """Decode exactly one frame."""
    if len(data) < 4:
        raise FramingError(f"truncated length prefix ({len(data)} bytes)")
    (length,) = _LEN.unpack_from(data)
    if length > MAX_FRAME:
        raise FrameTooLarge(f"declared frame length {length} exceeds {MAX_FRAME}")
    if len(data) - 4 < length:
        raise FramingError(f"truncated frame: declared {length}, have {len(data) - 4}")
    if len(data) - 4 > length:
        raise FramingError(f"{len(data) - 4 - length} trailing bytes after frame")
    return _decode_body(bytes(data[4:]))


class FrameDecoder:
    """Incremental decoder for a byte stream carrying back-to-back frames."""

    def __init__(self):
        self._buf = bytearray()

    def feed(self, data: bytes) -> list[ReliableEnvelope]:
        self._buf.extend(data)
        out = []
        while len(self._buf) >= 4:
            (length,) = _LEN.unpack_from(self._buf)
            if length > MAX_FRAME:
                raise FrameTooLarge(f"declared frame length {length} exceeds {MAX_FRAME}")
            if len(self._buf) < 4 + length:
                break
            body = bytes(self._buf[4:4 + length])
            del self._buf[:4 + length]
            out.append(_decode_body(body))
        return out

    @property
    def pending(self) -> int:
        return len(self._buf)

    def close(self) -> None:
        if self._buf:
            raise FramingError(f"stream ended inside a frame ({len(self._buf)} bytes pending)")


def decode_stream(data: bytes) -> list[ReliableEnvelope]:
    dec = FrameDecoder()
    out = dec.feed(data)
    dec.close()
    return out


async def read_frame(reader) -> ReliableEnvelope | None:
    """Read one frame from an asyncio StreamReader; ``None`` on clean EOF."""
    import asyncio

    try:
        head = await reader.readexactly(4)
    except asyncio.IncompleteReadError as exc:
        if exc.partial:
            raise FramingError("stream ended inside a length prefix") from None
        return None
    (length,) = _LEN.unpack(head)
    if length > MAX_FRAME:
        raise FrameTooLarge(f"declared frame length {length} exceeds {MAX_FRAME}")
    try:
        body = await reader.readexactly(length)
    except asyncio.IncompleteReadError:
        raise FramingError("stream ended inside a frame body") from None
    return _decode_body(body)


def check_seq_monotonic(trace: Iterable[tuple[object, ReliableEnvelope]]) -> list[str]:
    """Validate a message trace of ``(sender, envelope)`` pairs.

    Returns a list of problems; empty means seq strictly increases per sender
    per session.
    """
    last: dict[tuple[object, int], int] = {}
    problems = []
    for n, (sender, env) in enumerate(trace):
        key = (sender, env.session_id)
        if key in last and env.seq <= last[key]:
            problems.append(f"#{n}: sender {sender} seq {env.seq} after {last[key]}")
        last[key] = max(env.seq, last.get(key, env.seq))
    return problems


# -- pose datagrams -----------------------------------------------------------

POSE_MAGIC = b"VRTX"
POSE_VERSION = 1
_POSE = struct.Struct(">4sBIIQ" + "7f" * 3 + "3f")
POSE_SIZE = _POSE.size
assert POSE_SIZE == 117
UNIT_TOL = 1e-3

Vec3 = tuple[float, float, float]
Quat = tuple[float, float, float, float]


@dataclass(frozen=True)
class Transform:
    position: Vec3
    orientation: Quat = (0.0, 0.0, 0.0, 1.0)


def _norm(v: Sequence[float]) -> float:
    return math.sqrt(sum(x * x for x in v))


@dataclass(frozen=True)
class PoseUpdate:
    client_id: int
    seq: int
    t_us: int
    head: Transform
    hand_left: Transform
    hand_right: Transform
    gaze: Vec3 = (0.0, 0.0, 1.0)
    version: int = POSE_VERSION

    def validate(self) -> None:
        for name, v, hi in (("client_id", self.client_id, U32_MAX), ("seq", self.seq, U32_MAX),
                            ("t_us", self.t_us, U64_MAX), ("version", self.version, 255)):
            if isinstance(v, bool) or not isinstance(v, int) or not 0 <= v <= hi:
                raise PoseValidationError(f"{name} out of range: {v!r}")
        floats = list(self.gaze)
        for part in ("head", "hand_left", "hand_right"):
            tf = getattr(self, part)
            if len(tf.position) != 3 or len(tf.orientation) != 4:
                raise PoseValidationError(f"{part}: wrong component count")
            floats += list(tf.position) + list(tf.orientation)
            if abs(_norm(tf.orientation) - 1.0) > UNIT_TOL:
                raise PoseValidationError(f"{part} quaternion is not unit-norm")
        if len(self.gaze) != 3:
            raise PoseValidationError("gaze: wrong component count")
        if not all(math.isfinite(x) for x in floats):
            raise PoseValidationError("non-finite component")
        if abs(_norm(self.gaze) - 1.0) > UNIT_TOL:
            raise PoseValidationError("gaze is not a unit vector")


def encode_pose(p: PoseUpdate) -> bytes:
    p.validate()
    fields = []
    for tf in (p.head, p.hand_left, p.hand_right):
        fields += list(tf.position) + list(tf.orientation)
    try:
        return _POSE.pack(POSE_MAGIC, p.version, p.client_id, p.seq, p.t_us, *fields, *p.gaze)
    except (struct.error, OverflowError) as exc:
        raise PoseValidationError(f"cannot pack pose: {exc}") from None


def decode_pose(data: bytes) -> PoseUpdate:
    if len(data) < 4:
        raise TruncatedDatagram(f"{len(data)} bytes is shorter than the magic")
    if bytes(data[:4]) != POSE_MAGIC:
        raise NotAPose("bad magic")
    if len(data) < POSE_SIZE:
        raise TruncatedDatagram(f"{len(data)} bytes, expected {POSE_SIZE}")
    if len(data) > POSE_SIZE:
        raise DatagramLengthError(f"{len(data)} bytes, expected {POSE_SIZE}")
    vals = _POSE.unpack(data)
    _, version, client_id, seq, t_us = vals[:5]
    if version != POSE_VERSION:
        raise UnknownVersion(f"pose version {version}")
    f = vals[5:]
    tfs = [Transform(tuple(f[i:i + 3]), tuple(f[i + 3:i + 7])) for i in (0, 7, 14)]
    pose = PoseUpdate(client_id, seq, t_us, tfs[0], tfs[1], tfs[2], tuple(f[21:24]), version)
    pose.validate()
    return pose


# -- clock offset -------------------------------------------------------------

@dataclass(frozen=True)
class TimeSyncSample:
    """Client send, server receive, server send, client receive (microseconds)."""

    t1: int
    t2: int
    t3: int
    t4: int

    def __post_init__(self):
        if self.t4 < self.t1 or self.t3 < self.t2:
            raise ValidationFailure(f"inconsistent time-sync sample {self}")

    @property
    def offset(self) -> float:
        """Server clock minus client clock."""
        return ((self.t2 - self.t1) + (self.t3 - self.t4)) / 2

    @property
    def rtt(self) -> int:
        return (self.t4 - self.t1) - (self.t3 - self.t2)

    def to_json(self) -> list[int]:
        return [self.t1, self.t2, self.t3, self.t4]

    @classmethod
    def from_json(cls, doc: Sequence[int]) -> "TimeSyncSample":
        return cls(*(int(x) for x in doc))


def estimate_clock_offset(samples: Sequence[TimeSyncSample]) -> float:
    """Offset of the minimum-round-trip sample (earliest wins ties)."""
    if not samples:
        raise NoSamples("no time-sync samples")
    best = min(samples, key=lambda s: s.rtt)
    return best.offset


def iter_frames(envs: Iterable[ReliableEnvelope]) -> Iterator[bytes]:
    for env in envs:
        yield encode_frame(env)
