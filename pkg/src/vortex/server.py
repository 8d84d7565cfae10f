"""Central coordination node.

``Session`` is the pure, single-writer state machine (admission, permission
checks, versioning, pose latest-wins, archive assembly). ``SessionServer``
wraps it in asyncio transports: one TCP listener for reliable frames, one UDP
socket for pose datagrams, and a fixed-rate tick loop that drives physiology.
"""

from __future__ import annotations

import asyncio
import gc
import logging
import math
import random
import statistics
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .archive import SessionArchive
from .core import Role, RosterEntry, SessionClock, SessionRoster
from .errors import ValidationFailure, VortexError
from .physiology import (SYSTEM, DrugEffect, EventKind, ScenarioScript, SimEvent, Simulation,
                         load_drug_table)
from .protocol import (MsgType, PoseError, ProtocolError, ReliableEnvelope, TimeSyncSample,
                       decode_pose, encode_frame, estimate_clock_offset, read_frame)

log = logging.getLogger(__name__)

MIN_TICK_HZ = 24
MAX_CLIENTS = 3


class AdmissionError(ValidationFailure):
    pass


class RoleTaken(AdmissionError):
    pass


class SessionFull(AdmissionError):
    pass


class NoSuchSession(AdmissionError):
    pass


class RoleViolation(ValidationFailure):
    pass


class DuplicateDropped(ValidationFailure):
    pass


class ArchiveIncomplete(ValidationFailure):
    def __init__(self, roles: list[str], path: Path | None = None):
        super().__init__(f"no transcript upload from {', '.join(roles)}; partial archive written")
        self.roles = roles
        self.path = path


# Who may trigger what. Scripted physiology events belong to the server alone.
PERMISSIONS: dict[str, frozenset[Role]] = {
    EventKind.TIMEOUT.value: frozenset({Role.NURSE}),
    EventKind.EQUIPMENT_ARRIVAL.value: frozenset({Role.NURSE}),
    EventKind.HELP_ARRIVES.value: frozenset({Role.NURSE}),
    EventKind.CONVERT_TO_OPEN.value: frozenset({Role.SURGEON}),
    EventKind.NEEDLE_DECOMPRESSION.value: frozenset({Role.SURGEON, Role.ANESTHESIOLOGIST}),
    EventKind.HEMORRHAGE_STAGE.value: frozenset(),
    EventKind.PNEUMOTHORAX_ONSET.value: frozenset(),
    "drug": frozenset({Role.ANESTHESIOLOGIST}),
}


def permitted(role: Role, action: str) -> bool:
    return role in PERMISSIONS.get(action, frozenset())


@dataclass
class SessionConfig:
    scenario: ScenarioScript
    bind_reliable: tuple[str, int] = ("127.0.0.1", 7400)
    bind_pose: tuple[str, int] = ("127.0.0.1", 7401)
    tick_hz: int = 60
    duration: float | None = None
    max_clients: int = MAX_CLIENTS
    session_id: int | None = None
    join_timeout: float | None = None
    upload_timeout: float = 10.0
    spin_s: float = 0.004

    def __post_init__(self):
        if self.tick_hz < MIN_TICK_HZ:
            raise ValidationFailure(f"tick_hz must be >= {MIN_TICK_HZ}, got {self.tick_hz}")
        if not 1 <= self.max_clients <= MAX_CLIENTS:
            raise ValidationFailure(f"max_clients must be 1..{MAX_CLIENTS}")
        if self.duration is None:
            self.duration = self.scenario.duration
        if not self.duration > 0:
            raise ValidationFailure("duration must be positive")


@dataclass
class PoseCounters:
    received: int = 0
    fresh: int = 0
    forwarded: int = 0
    stale: int = 0
    malformed: int = 0
    unadmitted: int = 0

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Upload:
    records: list[dict]
    samples: list[TimeSyncSample]


def _rtt_summary(samples: list[TimeSyncSample]) -> dict:
    rtts = [s.rtt / 1000.0 for s in samples]
    return {
        "n": len(rtts),
        "mean_ms": statistics.fmean(rtts),
        "min_ms": min(rtts),
        "max_ms": max(rtts),
        "offset_us": estimate_clock_offset(samples),
    }


class Session:
    """Authoritative session state. Not thread-safe: one writer owns it."""

    def __init__(self, config: SessionConfig, session_id: int, *,
                 clock: Callable[[], int] | None = None):
        self.config = config
        self.session_id = session_id
        self.now_us = clock or (lambda: time.time_ns() // 1000)
        self.roster = SessionRoster(())
        self.version = 0
        self.sim = Simulation(config.scenario)
        self.drugs = load_drug_table()
        self.session_start: int | None = None
        self.ended = False
        self.event_log: list[dict] = []
        self.active_events: list[dict] = []
        self._next_client = 1
        self._last_critical: dict[int, int] = {}
        self.pose_seq: dict[int, int] = {}
        self.pose = PoseCounters()
        self.uploads: dict[int, Upload] = {}

    # -- admission ------------------------------------------------------------

    @property
    def full(self) -> bool:
        return len(self.roster) >= self.config.max_clients

    def admit(self, hello: dict) -> RosterEntry:
        wanted = int(hello.get("session_id") or 0)
        if wanted and wanted != self.session_id:
            raise NoSuchSession(f"session {wanted} does not exist")
        if self.session_start is not None or self.ended:
            raise SessionFull("session already started")
        if self.full:
            raise SessionFull(f"session has {self.config.max_clients} participants")
        role = Role.parse(str(hello.get("role", "")))
        if role in self.roster:
            raise RoleTaken(f"{role.value} is already taken")
        entry = RosterEntry(self._next_client, role)
        self._next_client += 1
        self.roster = self.roster.with_entry(entry)
        self.version += 1
        return entry

    def start(self) -> int:
        self.session_start = self.now_us()
        self.version += 1
        return self.session_start

    def session_time(self, now_us: int | None = None) -> float:
        if self.session_start is None:
            return 0.0
        now = self.now_us() if now_us is None else now_us
        return min(max((now - self.session_start) / 1e6, 0.0), self.config.duration)

    def state_doc(self) -> dict:
        return {
            "version": self.version,
            "t": self.sim.t,
            "vitals": self.sim.vitals().to_json(),
            "active_events": list(self.active_events),
            "roster": self.roster.to_json(),
        }

    # -- critical updates -----------------------------------------------------

    def apply_critical_update(self, client_id: int, seq: int, payload: dict,
                              t: float | None = None) -> dict:
        """Validate and apply one client-originated update; returns the log entry."""
        entry = self.roster.by_client(client_id)
        if entry is None:
            raise RoleViolation(f"client {client_id} is not admitted")
        if seq <= self._last_critical.get(client_id, -1):
            raise DuplicateDropped(f"client {client_id} seq {seq} already applied")
        t = self.session_time() if t is None else t
        if "drug" in payload:
            action = "drug"
            update: SimEvent | DrugEffect = DrugEffect.of(
                str(payload["drug"]), float(payload.get("dose", 1.0)), t, self.drugs)
        else:
            try:
                ev = SimEvent.from_json({**payload, "actor": entry.role.value})
            except (TypeError, ValueError) as exc:
                raise ValidationFailure(f"bad event payload: {exc}") from None
            action = ev.kind.value
            update = ev
        if not permitted(entry.role, action):
            raise RoleViolation(f"{entry.role.value} may not trigger {action}")
        self.sim.advance_to(t)
        self.sim.intervene(update, max(t, self.sim.t))
        self._last_critical[client_id] = seq
        self.version += 1
        record = {**update.to_json(), "t": round(max(t, self.sim.t), 3),
                  "actor": entry.role.value, "version": self.version}
        record.pop("trigger", None)
        self.event_log.append(record)
        self.active_events.append(record)
        return record

    def advance(self, t: float) -> tuple[list[dict], dict | None]:
        """Advance physiology to session time ``t``.

        Returns the scripted events that fired and, if vitals moved, a state
        snapshot. Each is one version bump, in that order.
        """
        ticks = self.sim.advance_to(t)
        fired = []
        for ft, ev in self.sim.new_events():
            self.version += 1
            rec = {**ev.to_json(), "t": round(ft, 3), "actor": SYSTEM, "version": self.version}
            rec.pop("trigger", None)
            self.event_log.append(rec)
            self.active_events.append(rec)
            fired.append(rec)
        if not ticks:
            return fired, None
        self.version += 1
        return fired, self.state_doc()

    # -- pose relay -----------------------------------------------------------

    def accept_pose(self, datagram: bytes) -> int | None:
        """Latest-wins gate. Returns the sender's client id if it should be forwarded."""
        self.pose.received += 1
        try:
            pose = decode_pose(datagram)
        except PoseError:
            self.pose.malformed += 1
            return None
        if self.roster.by_client(pose.client_id) is None:
            self.pose.unadmitted += 1
            return None
        last = self.pose_seq.get(pose.client_id)
        if last is not None and pose.seq <= last:
            self.pose.stale += 1
            return None
        self.pose_seq[pose.client_id] = pose.seq
        self.pose.fresh += 1
        return pose.client_id

    # -- archive ----------------------------------------------------------------

    def record_upload(self, client_id: int, payload: dict) -> None:
        samples = [TimeSyncSample.from_json(s) for s in payload.get("sync_samples", [])]
        records = payload.get("records", [])
        if not isinstance(records, list):
            raise ValidationFailure("upload records must be a list")
        self.uploads[client_id] = Upload(records, samples)

    def finalize(self, metrics: dict | None = None) -> SessionArchive:
        start = self.session_start if self.session_start is not None else self.now_us()
        clock = SessionClock(start, float(self.config.duration))
        streams: dict[Role, list[dict]] = {}
        rtt: dict[str, dict] = {}
        missing = []
        for entry in self.roster.entries:
            up = self.uploads.get(entry.client_id)
            if up is None:
                missing.append(entry.role.value)
                streams[entry.role] = []
                continue
            offset = estimate_clock_offset(up.samples) if up.samples else 0.0
            if up.samples:
                rtt[entry.display_alias] = _rtt_summary(up.samples)
            streams[entry.role] = [anonymize(r, entry, offset, start) for r in up.records]
            streams[entry.role].sort(key=lambda r: r["t"])
        return SessionArchive(
            session_id=self.session_id,
            roster=self.roster,
            clock=clock,
            event_log=list(self.event_log),
            streams=streams,
            rtt_stats=rtt,
            incomplete=missing,
            scenario=self.config.scenario.to_json(),
            metrics={"final_version": self.version, "pose": self.pose.to_json(),
                     **(metrics or {})},
        )


def to_session_time(t_local_us: float, offset_us: float, session_start_us: int) -> float:
    """Client-local microseconds to session seconds, rounded to the millisecond."""
    return round((t_local_us + offset_us - session_start_us) / 1e6, 3)


def anonymize(rec: dict, entry: RosterEntry, offset_us: float, start_us: int) -> dict:
    """Keep only whitelisted fields, stamp session time and the role alias."""
    kind = rec.get("type")
    out = {"type": kind, "t": to_session_time(float(rec["t_us"]), offset_us, start_us)}
    if kind == "utterance":
        out.update(speaker=entry.display_alias, text=str(rec["text"]))
        if rec.get("asr_confidence") is not None:
            out["asr_confidence"] = float(rec["asr_confidence"])
    elif kind == "action":
        out.update(actor=entry.display_alias, description=str(rec["description"]))
    elif kind == "gaze":
        out["dir"] = [float(x) for x in rec["dir"]]
        if rec.get("target"):
            out["target"] = str(rec["target"])
    else:
        raise ValidationFailure(f"unknown stream record type {kind!r}")
    return out


def jitter_stats(ticks_us: list[int], period_s: float) -> dict:
    """Inter-tick interval deviation from the nominal period, in seconds."""
    if len(ticks_us) < 2:
        return {"n": 0}
    dev = [abs((b - a) / 1e6 - period_s) for a, b in zip(ticks_us, ticks_us[1:])]
    ranked = sorted(dev)
    p99 = ranked[min(len(ranked) - 1, math.ceil(0.99 * len(ranked)) - 1)]
    worst = sorted(range(len(dev)), key=dev.__getitem__, reverse=True)[:10]
    return {
        "n": len(dev),
        "period_s": period_s,
        "p50_s": ranked[len(ranked) // 2],
        "p99_s": p99,
        "max_s": ranked[-1],
        "p99_fraction": p99 / period_s,
        "worst": [[i, round(dev[i], 6)] for i in sorted(worst)],
    }


# -- networking ---------------------------------------------------------------

@dataclass
class _Client:
    entry: RosterEntry | None
    writer: asyncio.StreamWriter
    pose_addr: tuple | None = None


class _PoseProtocol(asyncio.DatagramProtocol):
    def __init__(self, server: "SessionServer"):
        self.server = server
        self.transport: asyncio.DatagramTransport | None = None

    def connection_made(self, transport):
        self.transport = transport

    def datagram_received(self, data, addr):
        self.server.on_datagram(data, addr)


class SessionServer:
    def __init__(self, config: SessionConfig, archive_dir: str | Path | None = None):
        self.config = config
        sid = config.session_id or random.SystemRandom().randrange(1, 1 << 63)
        self.session = Session(config, sid)
        self.archive_dir = Path(archive_dir) if archive_dir else None
        self.clients: dict[int, _Client] = {}
        self._seq = 0
        self._started = asyncio.Event()
        self._ended = asyncio.Event()
        self._uploads_done = asyncio.Event()
        self._tcp: asyncio.AbstractServer | None = None
        self._udp: _PoseProtocol | None = None
        self.tick_times: list[int] = []
        self.reliable_addr: tuple | None = None
        self.pose_addr: tuple | None = None

    # -- reliable channel -------------------------------------------------------

    def _send(self, writer: asyncio.StreamWriter, msg_type: MsgType, payload: dict) -> None:
        self._seq += 1
        env = ReliableEnvelope(msg_type, self.session.session_id, self._seq, payload)
        if not writer.is_closing():
            writer.write(encode_frame(env))

    def broadcast(self, msg_type: MsgType, payload: dict, exclude: int | None = None) -> None:
        for cid, c in list(self.clients.items()):
            if cid != exclude:
                self._send(c.writer, msg_type, payload)

    async def _handle(self, reader: asyncio.StreamReader, writer: asyncio.StreamWriter):
        client = _Client(None, writer)
        try:
            while True:
                try:
                    env = await read_frame(reader)
                except ProtocolError as exc:
                    log.warning("dropping connection: %s", exc)
                    break
                except (ConnectionError, OSError):
                    break
                if env is None:
                    break
                recv_us = self.session.now_us()
                self._dispatch(client, env, recv_us)
                if client.entry is None and env.msg_type is MsgType.JOIN:
                    break  # rejected
        finally:
            if client.entry is not None:
                self.clients.pop(client.entry.client_id, None)
                if not self._ended.is_set():
                    log.warning("%s disconnected mid-session", client.entry.role.value)
                self._check_uploads()
            writer.close()

    def _dispatch(self, client: _Client, env: ReliableEnvelope, recv_us: int) -> None:
        s = self.session
        kind = env.msg_type
        if kind is MsgType.JOIN:
            try:
                entry = s.admit(env.payload)
            except (AdmissionError, ValidationFailure) as exc:
                self._send(client.writer, MsgType.JOIN_ACK,
                           {"ok": False, "error": type(exc).__name__, "message": str(exc)})
                return
            client.entry = entry
            self.clients[entry.client_id] = client
            self._send(client.writer, MsgType.JOIN_ACK, {
                "ok": True, "session_id": s.session_id, "client_id": entry.client_id,
                "role": entry.role.value, "state": s.state_doc(),
            })
            self.broadcast(MsgType.EVENT, {"kind": "Roster", "version": s.version,
                                           "roster": s.roster.to_json()},
                           exclude=entry.client_id)
            if s.full:
                self._start()
            return
        if client.entry is None:
            log.warning("message %s before Join; ignored", kind.value)
            return
        if env.session_id != s.session_id:
            log.warning("wrong session id %s from client %s", env.session_id,
                        client.entry.client_id)
            return
        if kind is MsgType.TIME_SYNC_REQ:
            self._send(client.writer, MsgType.TIME_SYNC_RESP, {
                "t1": env.payload.get("t1"), "t2": recv_us, "t3": s.now_us()})
        elif kind is MsgType.EVENT:
            self._on_update(client.entry, env)
        elif kind is MsgType.TRANSCRIPT_UPLOAD:
            try:
                s.record_upload(client.entry.client_id, env.payload)
            except (ValidationFailure, KeyError, TypeError, ValueError) as exc:
                log.warning("bad upload from %s: %s", client.entry.role.value, exc)
            self._check_uploads()
        elif kind is MsgType.SESSION_END:
            self._end("client")
        else:
            log.warning("unexpected %s from client", kind.value)

    def _on_update(self, entry: RosterEntry, env: ReliableEnvelope) -> None:
        s = self.session
        if s.session_start is None or s.ended:
            return
        try:
            rec = s.apply_critical_update(entry.client_id, env.seq, env.payload)
        except DuplicateDropped:
            return
        except VortexError as exc:
            self._send(self.clients[entry.client_id].writer, MsgType.EVENT, {
                "kind": "Rejected", "error": type(exc).__name__, "message": str(exc),
                "ref_seq": env.seq, "version": s.version})
            return
        self.broadcast(MsgType.EVENT, {"kind": "Update", "version": s.version, "event": rec})

    def _start(self) -> None:
        s = self.session
        start = s.start()
        self.broadcast(MsgType.EVENT, {"kind": "SessionStart", "version": s.version,
                                       "session_start_us": start,
                                       "duration": s.config.duration})
        self._started.set()

    def _end(self, reason: str) -> None:
        if self._ended.is_set():
            return
        s = self.session
        s.ended = True
        self.broadcast(MsgType.SESSION_END, {"version": s.version, "reason": reason})
        self._ended.set()
        self._check_uploads()

    def _check_uploads(self) -> None:
        """Stop waiting once every client has uploaded or gone away."""
        if self._ended.is_set() and all(e.client_id in self.session.uploads
                                        or e.client_id not in self.clients
                                        for e in self.session.roster.entries):
            self._uploads_done.set()

    # -- lossy channel ----------------------------------------------------------

    def on_datagram(self, data: bytes, addr) -> None:
        cid = self.session.accept_pose(data)
        if cid is None:
            return
        sender = self.clients.get(cid)
        if sender is not None:
            sender.pose_addr = addr
        others = [c for other_id, c in self.clients.items() if other_id != cid]
        sent = 0
        for c in others:
            if c.pose_addr is not None:
                self._udp.transport.sendto(data, c.pose_addr)
                sent += 1
        if sent == len(others):
            self.session.pose.forwarded += 1

    # -- tick loop ----------------------------------------------------------------

    async def _tick_loop(self) -> None:
        """Fixed-rate loop.

        Coarse sleep on the event loop, then a short spin to the deadline:
        selector timeouts are rounded to whole milliseconds, which alone is a
        sizeable share of a 60 Hz period. After an overrun the schedule restarts
        from the late tick so one hiccup costs one long interval, not a long/short
        pair.
        """
        s = self.session
        period = 1.0 / self.config.tick_hz
        spin = min(self.config.spin_s, period / 2)
        next_at = time.perf_counter()
        while not self._ended.is_set():
            started = time.perf_counter()
            self.tick_times.append(time.monotonic_ns() // 1000)
            t = s.session_time()
            fired, snapshot = s.advance(t)
            for rec in fired:
                self.broadcast(MsgType.EVENT, {"kind": "Update", "version": rec["version"],
                                               "event": rec})
            if snapshot is not None:
                self.broadcast(MsgType.STATE_SNAPSHOT, snapshot)
            if t >= self.config.duration:
                self._end("duration")
                break
            next_at = max(next_at, started) + period
            coarse = next_at - time.perf_counter() - spin
            await asyncio.sleep(coarse if coarse > 0 else 0)
            while time.perf_counter() < next_at:
                pass

    # -- lifecycle ----------------------------------------------------------------

    async def start(self) -> None:
        loop = asyncio.get_running_loop()
        host, port = self.config.bind_reliable
        self._tcp = await asyncio.start_server(self._handle, host, port)
        self.reliable_addr = self._tcp.sockets[0].getsockname()[:2]
        phost, pport = self.config.bind_pose
        transport, proto = await loop.create_datagram_endpoint(
            lambda: _PoseProtocol(self), local_addr=(phost, pport))
        self._udp = proto
        self.pose_addr = transport.get_extra_info("sockname")[:2]

    async def run(self) -> SessionArchive:
        if self._tcp is None:
            await self.start()
        try:
            if self.config.join_timeout:
                try:
                    await asyncio.wait_for(self._started.wait(), self.config.join_timeout)
                except asyncio.TimeoutError:
                    if not self.session.roster.entries:
                        raise ValidationFailure("no client joined before the join timeout")
                    self._start()
            else:
                await self._started.wait()
            gc.collect()
            gc.freeze()  # long-lived startup objects stay out of later collections
            await self._tick_loop()
            try:
                await asyncio.wait_for(self._uploads_done.wait(), self.config.upload_timeout)
            except asyncio.TimeoutError:
                pass
            archive = self.session.finalize({"tick": jitter_stats(
                self.tick_times, 1.0 / self.config.tick_hz), "tick_hz": self.config.tick_hz})
            if self.archive_dir is not None:
                archive.write(self.archive_dir)
            return archive
        finally:
            await self.close()

    async def close(self) -> None:
        for c in self.clients.values():
            c.writer.close()
        if self._tcp is not None:
            self._tcp.close()
            await self._tcp.wait_closed()
        if self._udp is not None and self._udp.transport is not None:
            self._udp.transport.close()


async def serve(config: SessionConfig, archive_dir: str | Path | None,
                on_ready: Callable[[SessionServer], None] | None = None) -> SessionArchive:
    server = SessionServer(config, archive_dir)
    await server.start()
    if on_ready is not None:
        on_ready(server)
    archive = await server.run()
    if archive.incomplete:
        raise ArchiveIncomplete(archive.incomplete, server.archive_dir)
    return archive
