"""Deterministic patient-state engine for the bleeding and pneumothorax scenarios.

Time advances in fixed 10 Hz ticks held as integers, so replaying the same
script and intervention log reproduces the trajectory bit for bit. Blood loss
is integrated explicitly; every other vital is a closed-form function of the
event times recorded in the state.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

from .core import RangeError, Role
from .errors import InvalidIntervention, NumericalError, ScenarioError
from .jsonio import read_json

TICK_HZ = 10
TICK_S = 1.0 / TICK_HZ

HEMORRHAGE_RATES_ML_S = {1: 2.0, 2: 8.0, 3: 20.0, 4: 50.0}
SHOCK_LOSS_ML = 5000.0
HR_GAIN = 0.6
MAP_DROP = 0.5
CONTROL_DELAY_S = 30.0

SPO2_DECLINE = 0.4  # %/s
SPO2_FLOOR = 70.0
ETCO2_RISE = 0.2  # mmHg/s
ETCO2_CAP = 60.0
RECOVERY_TAU_S = 30.0

BOUNDS = {
    "hr": (0.0, 300.0),
    "sbp": (0.0, 300.0),
    "dbp": (0.0, 300.0),
    "spo2": (0.0, 100.0),
    "rr": (0.0, 60.0),
    "etco2": (0.0, 150.0),
}
DATA_DIR = Path(__file__).parent / "data"


def mean_arterial(sbp: float, dbp: float) -> float:
    # clamp: rounding can push the mean an ulp outside [dbp, sbp]
    return min(sbp, max(dbp, (sbp + 2.0 * dbp) / 3.0))


@dataclass(frozen=True)
class VitalSigns:
    hr: float
    sbp: float
    dbp: float
    map: float
    spo2: float
    rr: float
    etco2: float
    blood_loss: float

    @classmethod
    def baseline(cls, hr=72.0, sbp=120.0, dbp=80.0, spo2=98.0, rr=12.0, etco2=35.0) -> "VitalSigns":
        return cls(hr, sbp, dbp, mean_arterial(sbp, dbp), spo2, rr, etco2, 0.0)

    def to_json(self) -> dict:
        return {k: getattr(self, k) for k in
                ("hr", "sbp", "dbp", "map", "spo2", "rr", "etco2", "blood_loss")}

    @classmethod
    def from_json(cls, doc: dict) -> "VitalSigns":
        base = cls.baseline(**{k: float(doc[k]) for k in ("hr", "sbp", "dbp", "spo2", "rr", "etco2")
                               if k in doc})
        return base

    def lerp(self, other: "VitalSigns", w: float) -> "VitalSigns":
        a, b = self.to_json(), other.to_json()
        vals = {k: (1.0 - w) * a[k] + w * b[k] for k in a}
        vals["map"] = mean_arterial(vals["sbp"], vals["dbp"])
        return VitalSigns(**vals)


# -- drugs -------------------------------------------------------------------

@dataclass(frozen=True)
class DrugSpec:
    name: str
    tau_on: float
    tau_off: float
    targets: tuple[tuple[str, float], ...]


def load_drug_table(path: str | Path | None = None) -> dict[str, DrugSpec]:
    doc = read_json(path or DATA_DIR / "drugs.json")
    table = {}
    for name, spec in doc["drugs"].items():
        table[name] = DrugSpec(name, float(spec["tau_on"]), float(spec["tau_off"]),
                               tuple(sorted((k, float(v)) for k, v in spec["targets"].items())))
    return table


@dataclass(frozen=True)
class DrugEffect:
    drug: str
    dose: float
    t_admin: float
    tau_on: float
    tau_off: float
    targets: tuple[tuple[str, float], ...] = ()

    def __post_init__(self):
        if not (self.tau_on > 0 and self.tau_off > 0):
            raise InvalidIntervention(f"{self.drug}: time constants must be positive")
        for vital, _ in self.targets:
            if vital not in BOUNDS:
                raise InvalidIntervention(f"{self.drug}: unknown target vital {vital!r}")

    @classmethod
    def of(cls, drug: str, dose: float, t_admin: float,
           table: dict[str, DrugSpec] | None = None) -> "DrugEffect":
        table = table if table is not None else load_drug_table()
        try:
            spec = table[drug]
        except KeyError:
            raise InvalidIntervention(f"unknown drug {drug!r}") from None
        return cls(drug, float(dose), float(t_admin), spec.tau_on, spec.tau_off, spec.targets)

    @property
    def key(self) -> str:
        return f"drug:{self.drug}"

    def magnitude(self, t: float) -> float:
        """Onset/washout shape scaled by dose; exactly zero at and before t_admin."""
        dt = t - self.t_admin
        if dt <= 0:
            return 0.0
        onset = 1.0 - math.exp(-dt / self.tau_on)
        washout = math.exp(-max(0.0, dt - 3.0 * self.tau_on) / self.tau_off)
        return self.dose * onset * washout

    def to_json(self) -> dict:
        return {"drug": self.drug, "dose": self.dose, "t": self.t_admin}


# -- scenario ----------------------------------------------------------------

class EventKind(str, enum.Enum):
    HEMORRHAGE_STAGE = "HemorrhageStage"
    PNEUMOTHORAX_ONSET = "PneumothoraxOnset"
    NEEDLE_DECOMPRESSION = "NeedleDecompression"
    CONVERT_TO_OPEN = "ConvertToOpen"
    TIMEOUT = "Timeout"
    EQUIPMENT_ARRIVAL = "EquipmentArrival"
    HELP_ARRIVES = "HelpArrives"


SYSTEM = "System"
EQUIPMENT_ITEMS = ("blood", "argon", "major_kit")


@dataclass(frozen=True)
class Trigger:
    """Fire ``dwell`` seconds after event ``after`` unless a mitigation happened first."""

    after: int
    dwell: float
    unless: tuple[str, ...] = ()


@dataclass(frozen=True)
class SimEvent:
    kind: EventKind
    actor: str = SYSTEM
    t: float | None = None
    stage: int | None = None
    item: str | None = None
    trigger: Trigger | None = None

    def __post_init__(self):
        if self.kind is EventKind.HEMORRHAGE_STAGE and self.stage not in HEMORRHAGE_RATES_ML_S:
            raise ScenarioError(f"hemorrhage stage must be 1..4, got {self.stage}")
        if self.kind is EventKind.EQUIPMENT_ARRIVAL and self.item not in (None,) + EQUIPMENT_ITEMS:
            raise ScenarioError(f"unknown equipment {self.item!r}")
        if self.actor != SYSTEM:
            Role.parse(self.actor)

    @property
    def key(self) -> str:
        if self.kind is EventKind.HEMORRHAGE_STAGE:
            return f"{self.kind.value}:{self.stage}"
        if self.kind is EventKind.EQUIPMENT_ARRIVAL and self.item:
            return f"{self.kind.value}:{self.item}"
        return self.kind.value

    def to_json(self) -> dict:
        doc: dict = {"kind": self.kind.value, "actor": self.actor}
        if self.t is not None:
            doc["t"] = self.t
        if self.stage is not None:
            doc["stage"] = self.stage
        if self.item is not None:
            doc["item"] = self.item
        if self.trigger is not None:
            doc["trigger"] = {"after": self.trigger.after, "dwell": self.trigger.dwell,
                              "unless": list(self.trigger.unless)}
        return doc

    @classmethod
    def from_json(cls, doc: dict) -> "SimEvent":
        try:
            kind = EventKind(doc["kind"])
        except (KeyError, ValueError):
            raise ScenarioError(f"bad event kind in {doc!r}") from None
        trig = doc.get("trigger")
        trigger = None
        if trig is not None:
            trigger = Trigger(int(trig["after"]), float(trig["dwell"]),
                              tuple(trig.get("unless", ())))
        t = doc.get("t")
        return cls(kind, doc.get("actor", SYSTEM), None if t is None else float(t),
                   doc.get("stage"), doc.get("item"), trigger)


SCENARIO_KINDS = {
    "Bleeding": EventKind.HEMORRHAGE_STAGE,
    "Pneumothorax": EventKind.PNEUMOTHORAX_ONSET,
}


@dataclass(frozen=True)
class ScenarioScript:
    name: str
    duration: float
    baseline: VitalSigns
    events: tuple[SimEvent, ...]

    def __post_init__(self):
        if self.name not in SCENARIO_KINDS:
            raise ScenarioError(f"scenario must be one of {sorted(SCENARIO_KINDS)}, got {self.name!r}")
        if not self.duration > 0:
            raise ScenarioError("duration must be positive")
        foreign = {k for n, k in SCENARIO_KINDS.items() if n != self.name}
        last_stage = 0
        for i, ev in enumerate(self.events):
            if ev.kind in foreign:
                raise ScenarioError(f"{self.name} script contains {ev.kind.value}")
            if (ev.t is None) == (ev.trigger is None):
                raise ScenarioError(f"event {i} needs exactly one of 't' or 'trigger'")
            if ev.t is not None and not 0 <= ev.t <= self.duration:
                raise ScenarioError(f"event {i} at t={ev.t} outside [0, {self.duration}]")
            if ev.trigger is not None and not 0 <= ev.trigger.after < i:
                raise ScenarioError(f"event {i} must trigger after an earlier event")
            if ev.kind is EventKind.HEMORRHAGE_STAGE:
                if ev.stage < last_stage:
                    raise ScenarioError("hemorrhage stages must be non-decreasing")
                last_stage = ev.stage

    def to_json(self) -> dict:
        base = self.baseline
        return {
            "name": self.name,
            "duration": self.duration,
            "baseline": {k: getattr(base, k) for k in ("hr", "sbp", "dbp", "spo2", "rr", "etco2")},
            "events": [e.to_json() for e in self.events],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "ScenarioScript":
        try:
            return cls(doc["name"], float(doc["duration"]),
                       VitalSigns.from_json(doc.get("baseline", {})),
                       tuple(SimEvent.from_json(e) for e in doc.get("events", [])))
        except KeyError as exc:
            raise ScenarioError(f"scenario missing field {exc}") from None


def load_scenario(path: str | Path) -> ScenarioScript:
    return ScenarioScript.from_json(read_json(path))


def builtin_scenario(name: str) -> ScenarioScript:
    path = DATA_DIR / "scenarios" / f"{name.lower()}.json"
    if not path.is_file():
        known = sorted(p.stem for p in (DATA_DIR / "scenarios").glob("*.json"))
        raise ScenarioError(f"unknown scenario {name!r}; bundled: {', '.join(known)}")
    return load_scenario(path)


# -- state -------------------------------------------------------------------

def _tick_at(t: float) -> int:
    """First tick at or after t."""
    return math.ceil(t * TICK_HZ - 1e-9)


@dataclass(frozen=True)
class PatientState:
    script: ScenarioScript
    tick: int = 0
    residual: float = 0.0
    blood_loss: float = 0.0
    stage_changes: tuple[tuple[int, int], ...] = ()  # (tick, stage)
    ptx_onset: float | None = None
    decompression: float | None = None
    convert_open: float | None = None
    drugs: tuple[DrugEffect, ...] = ()
    interventions: tuple[tuple[str, float], ...] = ()  # (key, t)
    fired: tuple[tuple[int, int], ...] = ()  # (event index, tick)
    suppressed: tuple[int, ...] = field(default=())

    @property
    def t(self) -> float:
        return self.tick / TICK_HZ

    def stage_at(self, tick: int) -> int:
        stage = 0
        for k, s in self.stage_changes:
            if k <= tick:
                stage = max(stage, s)
        return stage

    @property
    def stage(self) -> int:
        return self.stage_at(self.tick)

    @property
    def stages_observed(self) -> list[int]:
        return [s for _, s in sorted(self.stage_changes)]

    def fired_events(self) -> list[tuple[float, SimEvent]]:
        return [(k / TICK_HZ, self.script.events[i]) for i, k in self.fired]


def initial_state(script: ScenarioScript) -> PatientState:
    return _fire_due(PatientState(script))


def _due_tick(state: PatientState, index: int, fired: dict[int, int]) -> int | None:
    ev = state.script.events[index]
    if ev.trigger is None:
        return _tick_at(ev.t)
    if ev.trigger.after not in fired:
        return None
    return fired[ev.trigger.after] + _tick_at(ev.trigger.dwell)


def _fire_due(state: PatientState) -> PatientState:
    fired = dict(state.fired)
    done = set(fired) | set(state.suppressed)
    changed = True
    while changed:  # a trigger with zero dwell can become due within the same tick
        changed = False
        for i, ev in enumerate(state.script.events):
            if i in done:
                continue
            due = _due_tick(state, i, fired)
            if due is None or due > state.tick:
                continue
            done.add(i)
            changed = True
            if ev.trigger and any(key in ev.trigger.unless and t <= due / TICK_HZ
                                  for key, t in state.interventions):
                state = replace(state, suppressed=state.suppressed + (i,))
                continue
            fired[i] = due
            state = replace(state, fired=state.fired + ((i, due),))
            state = _apply_event_effect(state, ev, due / TICK_HZ, scripted=True)
    return state


def _apply_event_effect(state: PatientState, ev: SimEvent, t: float, scripted: bool) -> PatientState:
    kind = ev.kind
    if kind is EventKind.HEMORRHAGE_STAGE:
        current = max((s for _, s in state.stage_changes), default=0)
        if ev.stage < current:
            if scripted:
                return state
            raise InvalidIntervention(f"stage {ev.stage} after stage {current}")
        return replace(state, stage_changes=state.stage_changes + ((_tick_at(t), ev.stage),))
    if kind is EventKind.PNEUMOTHORAX_ONSET:
        if state.ptx_onset is not None:
            if scripted:
                return state
            raise InvalidIntervention("pneumothorax already present")
        return replace(state, ptx_onset=t)
    if kind is EventKind.NEEDLE_DECOMPRESSION:
        if state.ptx_onset is None or state.ptx_onset > t:
            raise InvalidIntervention("needle decompression without an active pneumothorax")
        if state.decompression is not None:
            raise InvalidIntervention("chest already decompressed")
        return replace(state, decompression=t)
    if kind is EventKind.CONVERT_TO_OPEN:
        if state.convert_open is not None:
            raise InvalidIntervention("already converted to open")
        return replace(state, convert_open=t)
    return state  # timeout, equipment, help: logged only


def apply_intervention(state: PatientState, ev: SimEvent | DrugEffect, t: float) -> PatientState:
    """Register an intervention at session time ``t`` (not earlier than the state)."""
    if t < state.t - 1e-9:
        raise InvalidIntervention(f"t={t} is before the current state time {state.t}")
    if t > state.script.duration:
        raise InvalidIntervention(f"t={t} is after the session ends")
    if isinstance(ev, DrugEffect):
        if ev.t_admin != t:
            ev = replace(ev, t_admin=t)
        new = replace(state, drugs=state.drugs + (ev,))
    else:
        new = _apply_event_effect(state, ev, t, scripted=False)
    return replace(new, interventions=new.interventions + ((ev.key, t),))


def _bleeding(state: PatientState, tick: int) -> float:
    stage = state.stage_at(tick)
    if stage == 0:
        return 0.0
    if state.convert_open is not None and tick >= _tick_at(state.convert_open + CONTROL_DELAY_S):
        return 0.0
    return HEMORRHAGE_RATES_ML_S[stage]


def step(state: PatientState, dt: float) -> PatientState:
    if not dt > 0:
        raise RangeError("dt must be positive")
    total = state.residual + dt
    n = math.floor(total * TICK_HZ + 1e-9)
    residual = max(0.0, total - n * TICK_S)
    loss = state.blood_loss
    for _ in range(n):
        loss += _bleeding(state, state.tick) * TICK_S
        if not math.isfinite(loss):
            raise NumericalError(f"blood loss became {loss} at tick {state.tick}")
        state = _fire_due(replace(state, tick=state.tick + 1, blood_loss=loss))
    return replace(state, residual=residual)


def _ptx_spo2(state: PatientState, t: float, base: float) -> float:
    return max(SPO2_FLOOR, base - SPO2_DECLINE * (t - state.ptx_onset))


def _ptx_etco2(state: PatientState, t: float, base: float) -> float:
    return min(ETCO2_CAP, base + ETCO2_RISE * (t - state.ptx_onset))


def _vitals(state: PatientState) -> VitalSigns:
    base = state.script.baseline
    t = state.t
    frac = min(1.0, max(0.0, state.blood_loss / SHOCK_LOSS_ML))
    hr = base.hr * (1.0 + HR_GAIN * frac)
    scale = 1.0 - MAP_DROP * frac
    sbp = base.sbp * scale
    dbp = base.dbp * scale
    spo2, etco2, rr = base.spo2, base.etco2, base.rr

    if state.ptx_onset is not None and t >= state.ptx_onset:
        if state.decompression is None or t < state.decompression:
            spo2 = _ptx_spo2(state, t, base.spo2)
            etco2 = _ptx_etco2(state, t, base.etco2)
        else:
            td = state.decompression
            decay = math.exp(-(t - td) / RECOVERY_TAU_S)
            spo2 = base.spo2 + (_ptx_spo2(state, td, base.spo2) - base.spo2) * decay
            etco2 = base.etco2 + (_ptx_etco2(state, td, base.etco2) - base.etco2) * decay

    vals = {"hr": hr, "sbp": sbp, "dbp": dbp, "spo2": spo2, "rr": rr, "etco2": etco2}
    for drug in state.drugs:
        m = drug.magnitude(t)
        if m == 0.0:
            continue
        for vital, peak in drug.targets:
            vals[vital] += m * peak
    for k, v in vals.items():
        if not math.isfinite(v):
            raise NumericalError(f"{k} became {v} at t={t}")
        lo, hi = BOUNDS[k]
        vals[k] = min(hi, max(lo, v))
    vals["dbp"] = min(vals["dbp"], vals["sbp"])
    return VitalSigns(vals["hr"], vals["sbp"], vals["dbp"], mean_arterial(vals["sbp"], vals["dbp"]),
                      vals["spo2"], vals["rr"], vals["etco2"], state.blood_loss)


def vitals_snapshot(state: PatientState, t: float | None = None) -> VitalSigns:
    """Vitals at session time ``t`` (default: the state's own time).

    Times between physics ticks are linearly interpolated for display.
    """
    if t is None or abs(t - state.t) < 1e-9:
        return _vitals(state)
    if t < state.t:
        raise RangeError(f"cannot read t={t} from a state already at {state.t}")
    if t > state.script.duration + 1e-9:
        raise RangeError(f"t={t} is outside the session")
    k = math.floor(t * TICK_HZ + 1e-9)
    at = state if k == state.tick else step(replace(state, residual=0.0), (k - state.tick) * TICK_S)
    w = t * TICK_HZ - k
    if w < 1e-9:
        return _vitals(at)
    return _vitals(at).lerp(_vitals(step(replace(at, residual=0.0), TICK_S)), w)


# -- convenience ---------------------------------------------------------------

def intervention_from_json(doc: dict, drugs: dict[str, DrugSpec] | None = None
                           ) -> tuple[float, SimEvent | DrugEffect]:
    t = float(doc["t"])
    if "drug" in doc:
        return t, DrugEffect.of(doc["drug"], float(doc.get("dose", 1.0)), t, drugs)
    ev = SimEvent.from_json({k: v for k, v in doc.items() if k != "t"})
    return t, ev


def replay(script: ScenarioScript, interventions: Sequence[tuple[float, SimEvent | DrugEffect]],
           until: float | None = None, sample_every: float = 1.0) -> list[tuple[float, VitalSigns]]:
    """Run a script with a fixed intervention log and sample the trajectory."""
    until = script.duration if until is None else until
    pending = sorted(interventions, key=lambda p: p[0])
    state = initial_state(script)
    out = []
    stride = max(1, round(sample_every * TICK_HZ))
    last = _tick_at(until)
    i = 0
    for tick in range(0, last + 1):
        if tick > state.tick:
            state = step(state, TICK_S)
        while i < len(pending) and _tick_at(pending[i][0]) <= tick:
            t, ev = pending[i]
            state = apply_intervention(state, ev, max(t, state.t))
            i += 1
        if tick % stride == 0:
            out.append((state.t, _vitals(state)))
    return out


class Simulation:
    """Mutable wrapper used by the session server's event loop."""

    def __init__(self, script: ScenarioScript, drugs: dict[str, DrugSpec] | None = None):
        self.script = script
        self.drugs = drugs if drugs is not None else load_drug_table()
        self.state = initial_state(script)
        self._reported = 0

    @property
    def t(self) -> float:
        return self.state.t

    def advance_to(self, t: float) -> int:
        """Step to the last tick at or before ``t``; returns the number of ticks taken."""
        t = min(t, self.script.duration)
        target = math.floor(t * TICK_HZ + 1e-9)
        n = target - self.state.tick
        if n > 0:
            self.state = step(replace(self.state, residual=0.0), n * TICK_S)
        return max(n, 0)

    def intervene(self, ev: SimEvent | DrugEffect, t: float | None = None) -> None:
        self.state = apply_intervention(self.state, ev, self.state.t if t is None else t)

    def administer(self, drug: str, dose: float = 1.0) -> DrugEffect:
        effect = DrugEffect.of(drug, dose, self.state.t, self.drugs)
        self.intervene(effect)
        return effect

    def vitals(self, t: float | None = None) -> VitalSigns:
        return vitals_snapshot(self.state, t)

    def new_events(self) -> list[tuple[float, SimEvent]]:
        fired = self.state.fired_events()
        out = fired[self._reported:]
        self._reported = len(fired)
        return out


def events_from_log(entries: Iterable[dict], drugs=None) -> list[tuple[float, SimEvent | DrugEffect]]:
    return [intervention_from_json(e, drugs) for e in entries]
