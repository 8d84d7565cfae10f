"""Headless scripted participants and an in-process network fault injector.

A bot joins over the reliable channel, keeps its clock offset estimate fresh,
streams poses on the lossy channel, runs its timed actions and uploads its
recorded stream when the server ends the session.

Record timestamps: each utterance/action/gaze record is tied to the session
time it was scheduled for and converted to the bot's local clock with the
final offset estimate at upload. The server applies the same estimate (from
the same uploaded samples), so archived times are reproducible to the
millisecond regardless of network jitter.
"""

from __future__ import annotations

import asyncio
import logging
import math
import random
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .core import Role
from .errors import ValidationFailure
from .jsonio import read_json
from .physiology import EventKind
from .protocol import (MsgType, PoseError, PoseUpdate, ProtocolError, ReliableEnvelope,
                       TimeSyncSample, Transform, decode_pose, encode_frame, encode_pose,
                       estimate_clock_offset, read_frame)
from .server import permitted

log = logging.getLogger(__name__)

DATA_DIR = Path(__file__).parent / "data"
POSE_HZ = 30.0
SYNC_BURST = 8
SYNC_BURST_GAP_S = 0.05
SYNC_INTERVAL_S = 1.0
GAZE_HZ = 1


class ScriptError(ValidationFailure):
    pass


# -- scripts ------------------------------------------------------------------

@dataclass(frozen=True)
class Waypoint:
    head: tuple[float, float, float] = (0.0, 1.7, 0.0)
    gaze: tuple[float, float, float] = (0.0, 0.0, 1.0)
    target: str | None = None

    @classmethod
    def from_json(cls, doc: dict) -> "Waypoint":
        head = tuple(float(x) for x in doc.get("head", cls.head))
        gaze = tuple(float(x) for x in doc.get("gaze", cls.gaze))
        n = math.sqrt(sum(x * x for x in gaze))
        if len(head) != 3 or len(gaze) != 3 or n == 0:
            raise ScriptError(f"bad waypoint {doc!r}")
        return cls(head, tuple(x / n for x in gaze), doc.get("target"))


@dataclass(frozen=True)
class Action:
    t: float
    say: str | None = None
    asr_confidence: float | None = None
    trigger: dict | None = None
    description: str | None = None
    pose: Waypoint | None = None
    upload: bool = False
    when_event: str | None = None
    when_version: int | None = None
    delay: float = 0.0

    @property
    def kind(self) -> str:
        if self.say is not None:
            return "say"
        if self.trigger is not None:
            return "trigger"
        if self.pose is not None:
            return "pose"
        return "upload"

    @classmethod
    def from_json(cls, doc: dict) -> "Action":
        try:
            t = float(doc["t"])
        except (KeyError, TypeError, ValueError):
            raise ScriptError(f"action without a time: {doc!r}") from None
        present = [k for k in ("say", "trigger", "pose", "upload") if doc.get(k) not in (None, False)]
        if len(present) != 1:
            raise ScriptError(f"action must have exactly one of say/trigger/pose/upload: {doc!r}")
        when = doc.get("when") or {}
        return cls(
            t=t,
            say=doc.get("say"),
            asr_confidence=doc.get("asr_confidence"),
            trigger=doc.get("trigger"),
            description=doc.get("description"),
            pose=Waypoint.from_json(doc["pose"]) if doc.get("pose") else None,
            upload=bool(doc.get("upload")),
            when_event=when.get("event"),
            when_version=when.get("version"),
            delay=float(when.get("delay", 0.0)),
        )

    def to_json(self) -> dict:
        doc: dict = {"t": self.t}
        if self.say is not None:
            doc["say"] = self.say
            if self.asr_confidence is not None:
                doc["asr_confidence"] = self.asr_confidence
        if self.trigger is not None:
            doc["trigger"] = self.trigger
        if self.description is not None:
            doc["description"] = self.description
        if self.pose is not None:
            doc["pose"] = {"head": list(self.pose.head), "gaze": list(self.pose.gaze)}
            if self.pose.target:
                doc["pose"]["target"] = self.pose.target
        if self.upload:
            doc["upload"] = True
        when = {}
        if self.when_event is not None:
            when["event"] = self.when_event
        if self.when_version is not None:
            when["version"] = self.when_version
        if when:
            when["delay"] = self.delay
            doc["when"] = when
        return doc


def _trigger_action(trigger: dict) -> str:
    if "drug" in trigger:
        return "drug"
    try:
        return EventKind(trigger.get("kind")).value
    except ValueError:
        raise ScriptError(f"unknown trigger {trigger!r}") from None


@dataclass(frozen=True)
class BotScript:
    role: Role
    actions: tuple[Action, ...] = ()
    seed: int = 0
    start_pose: Waypoint = Waypoint()

    def __post_init__(self):
        times = [a.t for a in self.actions]
        if times != sorted(times):
            raise ScriptError("actions must be sorted by time")
        for a in self.actions:
            if a.trigger is not None and not permitted(self.role, _trigger_action(a.trigger)):
                raise ScriptError(f"{self.role.value} may not trigger {_trigger_action(a.trigger)}")

    @classmethod
    def from_json(cls, doc: dict) -> "BotScript":
        start = Waypoint.from_json(doc["start_pose"]) if doc.get("start_pose") else Waypoint()
        return cls(Role.parse(doc["role"]), tuple(Action.from_json(a) for a in doc.get("actions", [])),
                   int(doc.get("seed", 0)), start)

    def to_json(self) -> dict:
        return {"role": self.role.value, "seed": self.seed,
                "actions": [a.to_json() for a in self.actions]}


def load_bot_script(path: str | Path) -> BotScript:
    return BotScript.from_json(read_json(path))


def builtin_bot_scripts(scenario: str) -> list[BotScript]:
    """The three shipped confederate scripts for a scenario."""
    d = DATA_DIR / "bots"
    name = scenario.lower()
    paths = sorted(d.glob(f"{name}_*.json"))
    if not paths:
        raise ScriptError(f"no bundled bot scripts for {scenario!r}")
    return [load_bot_script(p) for p in paths]


# -- network shaping ----------------------------------------------------------

@dataclass(frozen=True)
class NetProfile:
    """Injected impairment.

    ``latency_ms`` is the round-trip figure: each direction is delayed by a
    uniform draw from half the range. ``jitter_ms`` adds a further uniform
    [0, jitter/2] per direction. Loss and reordering apply to datagrams only.
    """

    latency_min_ms: float = 0.0
    latency_max_ms: float = 0.0
    jitter_ms: float = 0.0
    datagram_loss: float = 0.0
    reorder: float = 0.0

    def __post_init__(self):
        if self.latency_min_ms < 0 or self.latency_max_ms < self.latency_min_ms:
            raise ValidationFailure("latency needs 0 <= min <= max")
        if self.jitter_ms < 0:
            raise ValidationFailure("jitter must be non-negative")
        for name in ("datagram_loss", "reorder"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationFailure(f"{name} must be a probability")

    @classmethod
    def from_json(cls, doc: dict) -> "NetProfile":
        lat = doc.get("latency_ms", 0.0)
        if isinstance(lat, dict):
            lo, hi = float(lat["min"]), float(lat["max"])
        else:
            lo = hi = float(lat)
        return cls(lo, hi, float(doc.get("jitter_ms", 0.0)), float(doc.get("datagram_loss", 0.0)),
                   float(doc.get("reorder", 0.0)))

    def to_json(self) -> dict:
        lat = (self.latency_min_ms if self.latency_min_ms == self.latency_max_ms
               else {"min": self.latency_min_ms, "max": self.latency_max_ms})
        return {"latency_ms": lat, "jitter_ms": self.jitter_ms,
                "datagram_loss": self.datagram_loss, "reorder": self.reorder}


LOOPBACK = NetProfile()


def load_profile(path: str | Path) -> NetProfile:
    p = Path(path)
    if not p.exists() and (DATA_DIR / "profiles" / f"{p.name}.json").exists():
        p = DATA_DIR / "profiles" / f"{p.name}.json"
    return NetProfile.from_json(read_json(p))


REORDER_EXTRA_S = 0.05


class FaultInjector:
    """Seeded delay/loss/reorder decisions for one bot's traffic."""

    def __init__(self, profile: NetProfile, seed: int = 0):
        self.profile = profile
        self.rng = random.Random(seed)
        self._last_out = 0.0
        self._last_in = 0.0

    def one_way_s(self) -> float:
        p = self.profile
        d = self.rng.uniform(p.latency_min_ms / 2, p.latency_max_ms / 2)
        if p.jitter_ms:
            d += self.rng.uniform(0.0, p.jitter_ms / 2)
        return d / 1000.0

    def stream_deadline(self, now: float, outbound: bool) -> float:
        """Delivery time on the reliable stream; order preserving."""
        at = now + self.one_way_s()
        if outbound:
            self._last_out = at = max(at, self._last_out)
        else:
            self._last_in = at = max(at, self._last_in)
        return at

    def datagram_delay(self) -> float | None:
        """Seconds to hold a datagram, or ``None`` to drop it."""
        p = self.profile
        if p.datagram_loss and self.rng.random() < p.datagram_loss:
            return None
        d = self.one_way_s()
        if p.reorder and self.rng.random() < p.reorder:
            d += self.rng.uniform(0.0, REORDER_EXTRA_S)
        return d


def shape_network(profile: NetProfile, seed: int = 0) -> FaultInjector:
    return FaultInjector(profile, seed)


# -- report -------------------------------------------------------------------

@dataclass
class BotReport:
    role: str
    client_id: int | None = None
    session_id: int | None = None
    joined: bool = False
    rejected: str | None = None
    aborted: bool = False
    rtts_ms: list[float] = field(default_factory=list)
    offset_us: float | None = None
    versions_received: int = 0
    last_version: int = 0
    server_final_version: int | None = None
    version_order_violations: int = 0
    events_observed: list[str] = field(default_factory=list)
    action_lag_s: list[float] = field(default_factory=list)
    poses_sent: int = 0
    poses_dropped_out: int = 0
    poses_received: int = 0
    poses_dropped_in: int = 0
    poses_applied: int = 0
    poses_stale: int = 0
    peer_last_seq: dict[int, int] = field(default_factory=dict)
    applied_seqs: dict[int, list[int]] = field(default_factory=dict)
    records_uploaded: int = 0

    @property
    def mean_rtt_ms(self) -> float | None:
        return sum(self.rtts_ms) / len(self.rtts_ms) if self.rtts_ms else None

    @property
    def pose_order_violations(self) -> int:
        """Applied poses whose sequence fell below the previous one from that peer."""
        return sum(b < a for seqs in self.applied_seqs.values() for a, b in zip(seqs, seqs[1:]))

    @property
    def converged(self) -> bool:
        return self.server_final_version is not None and self.last_version == self.server_final_version

    def to_json(self) -> dict:
        doc = dict(self.__dict__)
        doc["peer_last_seq"] = {str(k): v for k, v in self.peer_last_seq.items()}
        doc["applied_seqs"] = {str(k): len(v) for k, v in self.applied_seqs.items()}
        doc["pose_order_violations"] = self.pose_order_violations
        doc["mean_rtt_ms"] = self.mean_rtt_ms
        doc["converged"] = self.converged
        return doc


# -- the bot ------------------------------------------------------------------

def event_key(ev: dict) -> str:
    """Key of a logged event as used by conditional actions, e.g. ``HemorrhageStage:2``."""
    if "drug" in ev:
        return f"drug:{ev['drug']}"
    key = str(ev["kind"])
    if "stage" in ev:
        return f"{key}:{ev['stage']}"
    if ev.get("item"):
        return f"{key}:{ev['item']}"
    return key


def _yaw_quat(yaw: float) -> tuple[float, float, float, float]:
    return (0.0, math.sin(yaw / 2), 0.0, math.cos(yaw / 2))


class _PoseEndpoint(asyncio.DatagramProtocol):
    def __init__(self, bot: "Bot"):
        self.bot = bot
        self.transport = None

    def connection_made(self, transport):
        self.transport = transport

    def datagram_received(self, data, addr):
        self.bot._pose_in(data)

    def error_received(self, exc):
        log.debug("pose socket error: %s", exc)


class Bot:
    def __init__(self, script: BotScript, reliable: tuple[str, int], pose: tuple[str, int],
                 profile: NetProfile = LOOPBACK, seed: int = 0, *, pose_hz: float = POSE_HZ,
                 clock_skew_us: int = 0, session_id: int = 0):
        self.script = script
        self.reliable_addr = reliable
        self.pose_addr = pose
        self.fault = FaultInjector(profile, seed)
        self.persona = random.Random(script.seed)
        self.pose_hz = pose_hz
        self.skew_us = clock_skew_us
        self.wanted_session = session_id
        self.report = BotReport(script.role.value)
        self.session_id = 0
        self._seq = 0
        self._pose_seq = 0
        self.samples: list[TimeSyncSample] = []
        self.records: list[tuple[float, dict]] = []  # (session time, record)
        self.session_start: int | None = None
        self.duration: float | None = None
        self.event_times: dict[str, float] = {}
        self.waypoint = script.start_pose
        self._writer: asyncio.StreamWriter | None = None
        self._out: asyncio.Queue | None = None
        self._in: asyncio.Queue | None = None
        self._udp: _PoseEndpoint | None = None
        self._joined = asyncio.Event()
        self._started = asyncio.Event()
        self._ended = asyncio.Event()
        self._state_changed = asyncio.Event()
        self._tasks: list[asyncio.Task] = []

    # -- clocks ---------------------------------------------------------------

    def local_us(self) -> int:
        return time.time_ns() // 1000 + self.skew_us

    @property
    def offset_us(self) -> float:
        return estimate_clock_offset(self.samples) if self.samples else 0.0

    def session_now(self) -> float:
        if self.session_start is None:
            return 0.0
        return (self.local_us() + self.offset_us - self.session_start) / 1e6

    async def sleep_until(self, t: float) -> None:
        while not self._ended.is_set():
            remaining = t - self.session_now()
            if remaining <= 0:
                return
            await asyncio.sleep(min(remaining, 0.25))

    # -- reliable channel -------------------------------------------------------

    def send(self, msg_type: MsgType, payload: dict) -> int:
        self._seq += 1
        env = ReliableEnvelope(msg_type, self.session_id, self._seq, payload)
        loop = asyncio.get_running_loop()
        self._out.put_nowait((self.fault.stream_deadline(loop.time(), True), encode_frame(env)))
        return self._seq

    async def _out_pump(self) -> None:
        loop = asyncio.get_running_loop()
        while True:
            at, data = await self._out.get()
            delay = at - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            try:
                if not self._writer.is_closing():
                    self._writer.write(data)
                    await self._writer.drain()
            except (ConnectionError, OSError) as exc:
                log.warning("%s: send failed: %s", self.script.role.value, exc)
            finally:
                self._out.task_done()

    async def _reader(self, reader: asyncio.StreamReader) -> None:
        loop = asyncio.get_running_loop()
        while True:
            try:
                env = await read_frame(reader)
            except (ProtocolError, ConnectionError, OSError) as exc:
                log.warning("%s: reliable channel error: %s", self.script.role.value, exc)
                env = None
            self._in.put_nowait((self.fault.stream_deadline(loop.time(), False), env))
            if env is None:
                return

    async def _in_pump(self) -> None:
        loop = asyncio.get_running_loop()
        while True:
            at, env = await self._in.get()
            delay = at - loop.time()
            if delay > 0:
                await asyncio.sleep(delay)
            if env is None:
                if not self._ended.is_set():
                    self.report.aborted = self.report.joined
                    self._ended.set()
                self._joined.set()
                return
            try:
                self._on_message(env)
            except Exception as exc:  # one bad message must not stall the bot
                log.warning("%s: ignoring malformed %s: %r", self.script.role.value,
                            env.msg_type.value, exc)

    def _note_version(self, v: int) -> None:
        r = self.report
        r.versions_received += 1
        if v <= r.last_version:
            r.version_order_violations += 1
        r.last_version = max(r.last_version, v)
        self._state_changed.set()

    def _on_message(self, env: ReliableEnvelope) -> None:
        p = env.payload
        r = self.report
        kind = env.msg_type
        if kind is MsgType.JOIN_ACK:
            if p.get("ok"):
                r.joined = True
                r.client_id = p["client_id"]
                r.session_id = self.session_id = p["session_id"]
                self._note_version(p["state"]["version"])
            else:
                r.rejected = p.get("error", "rejected")
            self._joined.set()
        elif kind is MsgType.TIME_SYNC_RESP:
            t4 = self.local_us()
            sample = TimeSyncSample(int(p["t1"]), int(p["t2"]), int(p["t3"]), t4)
            self.samples.append(sample)
            r.rtts_ms.append(sample.rtt / 1000.0)
        elif kind is MsgType.STATE_SNAPSHOT:
            self._note_version(p["version"])
        elif kind is MsgType.EVENT:
            sub = p.get("kind")
            if sub == "Rejected":
                log.warning("%s: server rejected seq %s: %s", self.script.role.value,
                            p.get("ref_seq"), p.get("message"))
                return
            self._note_version(p["version"])
            if sub == "SessionStart":
                self.session_start = int(p["session_start_us"])
                self.duration = float(p["duration"])
                self._started.set()
            elif sub == "Update":
                key = event_key(p["event"])
                r.events_observed.append(key)
                self.event_times.setdefault(key, float(p["event"]["t"]))
        elif kind is MsgType.SESSION_END:
            r.server_final_version = int(p["version"])
            self._ended.set()

    # -- lossy channel ----------------------------------------------------------

    def _pose_now(self) -> PoseUpdate:
        self._pose_seq += 1
        wp = self.waypoint
        sway = 0.01 * math.sin(self._pose_seq / self.pose_hz + self.script.seed)
        head = Transform((wp.head[0] + sway, wp.head[1], wp.head[2]),
                         _yaw_quat(math.atan2(wp.gaze[0], wp.gaze[2])))
        left = Transform((wp.head[0] - 0.25, wp.head[1] - 0.5, wp.head[2] + 0.3))
        right = Transform((wp.head[0] + 0.25, wp.head[1] - 0.5, wp.head[2] + 0.3))
        return PoseUpdate(self.report.client_id, self._pose_seq & 0xFFFFFFFF, self.local_us(),
                          head, left, right, wp.gaze)

    def _send_datagram(self, data: bytes) -> None:
        if self._udp.transport is not None and not self._udp.transport.is_closing():
            self._udp.transport.sendto(data)

    async def _pose_loop(self) -> None:
        loop = asyncio.get_running_loop()
        period = 1.0 / self.pose_hz
        next_at = loop.time()
        while not self._ended.is_set():
            data = encode_pose(self._pose_now())
            self.report.poses_sent += 1
            delay = self.fault.datagram_delay()
            if delay is None:
                self.report.poses_dropped_out += 1
            elif delay == 0:
                self._send_datagram(data)
            else:
                loop.call_later(delay, self._send_datagram, data)
            next_at += period
            await asyncio.sleep(max(0.0, next_at - loop.time()))

    def _pose_in(self, data: bytes) -> None:
        delay = self.fault.datagram_delay()
        if delay is None:
            self.report.poses_dropped_in += 1
            return
        if delay == 0:
            self._apply_pose(data)
        else:
            asyncio.get_running_loop().call_later(delay, self._apply_pose, data)

    def _apply_pose(self, data: bytes) -> None:
        r = self.report
        r.poses_received += 1
        try:
            pose = decode_pose(data)
        except PoseError:
            return  # unknown versions and garbage are dropped silently
        last = r.peer_last_seq.get(pose.client_id)
        if last is not None and pose.seq <= last:
            r.poses_stale += 1
            return
        r.peer_last_seq[pose.client_id] = pose.seq
        r.applied_seqs.setdefault(pose.client_id, []).append(pose.seq)
        r.poses_applied += 1

    # -- behaviour ----------------------------------------------------------------

    async def _sync_loop(self) -> None:
        for _ in range(SYNC_BURST):
            self.send(MsgType.TIME_SYNC_REQ, {"t1": self.local_us()})
            await asyncio.sleep(SYNC_BURST_GAP_S)
        while not self._ended.is_set():
            try:
                await asyncio.wait_for(self._ended.wait(), SYNC_INTERVAL_S)
            except asyncio.TimeoutError:
                self.send(MsgType.TIME_SYNC_REQ, {"t1": self.local_us()})

    async def _gaze_loop(self) -> None:
        k = 0
        while self.duration is None or k <= self.duration:
            await self.sleep_until(k / GAZE_HZ)
            if self._ended.is_set():
                return
            rec = {"type": "gaze", "dir": list(self.waypoint.gaze)}
            if self.waypoint.target:
                rec["target"] = self.waypoint.target
            self.records.append((k / GAZE_HZ, rec))
            k += 1

    async def _when(self, a: Action) -> float:
        """Session time at which a conditional action becomes due."""
        due = a.t
        if a.when_event is not None:
            while a.when_event not in self.event_times and not self._ended.is_set():
                self._state_changed.clear()
                await self._state_changed.wait()
            if a.when_event in self.event_times:
                due = max(due, self.event_times[a.when_event] + a.delay)
        if a.when_version is not None:
            while self.report.last_version < a.when_version and not self._ended.is_set():
                self._state_changed.clear()
                await self._state_changed.wait()
            due = max(due, round(self.session_now() + a.delay, 3))
        return due

    async def _perform(self, a: Action) -> None:
        due = await self._when(a) if (a.when_event or a.when_version is not None) else a.t
        await self.sleep_until(due)
        if self._ended.is_set():
            return
        self.report.action_lag_s.append(self.session_now() - due)
        if a.say is not None:
            rec = {"type": "utterance", "text": a.say}
            if a.asr_confidence is not None:
                rec["asr_confidence"] = a.asr_confidence
            self.records.append((due, rec))
        elif a.trigger is not None:
            self.send(MsgType.EVENT, dict(a.trigger))
            if a.description:
                self.records.append((due, {"type": "action", "description": a.description}))
        elif a.pose is not None:
            self.waypoint = a.pose
        elif a.upload:
            self._upload()

    def _upload(self) -> float:
        off = self.offset_us
        out = []
        for t, rec in sorted(self.records, key=lambda p: p[0]):
            out.append({**rec, "t_us": self.session_start + t * 1e6 - off})
        self.report.records_uploaded = len(out)
        self.send(MsgType.TRANSCRIPT_UPLOAD, {
            "records": out, "sync_samples": [s.to_json() for s in self.samples]})
        return off

    # -- lifecycle ----------------------------------------------------------------

    async def run(self, join_timeout: float = 30.0) -> BotReport:
        loop = asyncio.get_running_loop()
        try:
            reader, self._writer = await asyncio.open_connection(*self.reliable_addr)
        except OSError as exc:
            self.report.rejected = f"connect failed: {exc}"
            return self.report
        self._out, self._in = asyncio.Queue(), asyncio.Queue()
        self._tasks = [asyncio.create_task(c) for c in
                       (self._out_pump(), self._reader(reader), self._in_pump())]
        try:
            self.send(MsgType.JOIN, {"role": self.script.role.value,
                                     "session_id": self.wanted_session})
            await asyncio.wait_for(self._joined.wait(), join_timeout)
            if not self.report.joined:
                return self.report
            _, self._udp = await loop.create_datagram_endpoint(
                lambda: _PoseEndpoint(self), remote_addr=self.pose_addr)
            self._tasks.append(asyncio.create_task(self._sync_loop()))
            self._tasks.append(asyncio.create_task(self._pose_loop()))
            started = asyncio.create_task(self._started.wait())
            ended = asyncio.create_task(self._ended.wait())
            await asyncio.wait({started, ended}, return_when=asyncio.FIRST_COMPLETED)
            started.cancel()
            if self._started.is_set():
                workers = [asyncio.create_task(self._perform(a)) for a in self.script.actions]
                workers.append(asyncio.create_task(self._gaze_loop()))
                await ended
                for w in workers:
                    w.cancel()
                if not self.report.aborted:
                    self.report.offset_us = self._upload()
                    await self._drain_out()
            else:
                ended.cancel()
        except asyncio.TimeoutError:
            self.report.rejected = "join timed out"
        finally:
            await self._shutdown()
        return self.report

    async def _drain_out(self, limit: float = 5.0) -> None:
        """Wait until every queued frame has been handed to the socket."""
        try:
            await asyncio.wait_for(self._out.join(), limit)
        except asyncio.TimeoutError:
            log.warning("%s: %d frames still queued at shutdown", self.script.role.value,
                        self._out.qsize())

    async def _shutdown(self) -> None:
        for t in self._tasks:
            t.cancel()
        await asyncio.gather(*self._tasks, return_exceptions=True)
        if self._udp is not None and self._udp.transport is not None:
            self._udp.transport.close()
        if self._writer is not None:
            self._writer.close()


async def run_bot(script: BotScript, reliable: tuple[str, int], pose: tuple[str, int],
                  profile: NetProfile = LOOPBACK, seed: int = 0, **kw) -> BotReport:
    return await Bot(script, reliable, pose, profile, seed, **kw).run()


async def run_team(scripts: Sequence[BotScript], reliable: tuple[str, int],
                   pose: tuple[str, int], profile: NetProfile = LOOPBACK, seed: int = 0,
                   **kw) -> list[BotReport]:
    """Run several bots concurrently; each gets its own injector seed."""
    bots = [Bot(s, reliable, pose, profile, seed * 1000 + i, **kw) for i, s in enumerate(scripts)]
    return list(await asyncio.gather(*(b.run() for b in bots)))
