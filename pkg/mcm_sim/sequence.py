"""Timed schedule of the mid-circuit measurement characterization circuit.

The compiler turns a RunConfig into a SequenceIR: integer-nanosecond events on
named actuator channels. Sections run in the order prep, input, mcm, output,
blowaway.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, ClassVar, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

from .atomic_model import LevelState, ScatterParams, mw_coupling, parse_transition, split_pair
from .budget import shiftout_settings
from .config import RunConfig
from .errors import ConfigError, SequenceError
from .pulse_engine import (
    SHELVE_LOWER_PAIR,
    PulseOp,
    corpse,
    invert_pulses,
    plain_pulse,
    solve_horn_phase,
)
from .trap import TrapPlan, blackman_ramp, scale_trap_plan

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SECTIONS = ("prep", "input", "mcm", "output", "blowaway")
CHANNELS = ("trap", "shiftout", "microwave", "readout", "camera", "blowaway")
BLOWAWAY_NS = 20_000

PREP_CHAIN = ("4,4->3,3", "3,3->4,3", "4,3->3,2", "3,2->4,1", "4,1->3,0")
CLOCK = (LevelState(3, 0), LevelState(4, 0))
UNSHELVE_F4 = (LevelState(4, -1), LevelState(3, -1))
ECHO_SWAP = (LevelState(3, -1), LevelState(4, 0))
REPUMP_PAIRS = (
    (LevelState(3, 1), LevelState(4, 1)),
    (LevelState(4, 2), LevelState(3, 2)),
    (LevelState(3, 3), LevelState(4, 3)),
)

# label -> (rotation angle, phase) of the clock-state input pulse; R(theta, phi)|0> =
# cos(theta/2)|0> - i exp(i phi) sin(theta/2)|1>
INPUT_ROTATIONS: Dict[str, Optional[Tuple[float, float]]] = {
    "0": None,
    "1": (math.pi, math.pi / 2.0),
    "x": (math.pi / 2.0, math.pi / 2.0),
    "-x": (math.pi / 2.0, -math.pi / 2.0),
    "y": (math.pi / 2.0, math.pi),
    "-y": (math.pi / 2.0, 0.0),
}
INPUT_ALIASES = {"z": "0", "+z": "0", "-z": "1", "+x": "x", "+y": "y"}
CARDINAL_INPUTS = ("x", "-x", "y", "-y", "0", "1")


def normalize_input(label: str) -> str:
    key = INPUT_ALIASES.get(str(label).strip(), str(label).strip())
    if key not in INPUT_ROTATIONS:
        raise ConfigError(f"unknown input state '{label}' (expected one of {', '.join(INPUT_ROTATIONS)})")
    return key


# --- payloads ----------------------------------------------------------------

@dataclass(frozen=True)
class MicrowavePulse:
    channel: ClassVar[str] = "microwave"
    op: PulseOp

    def to_document(self) -> Dict[str, Any]:
        op = self.op
        pol = None
        if op.polarization is not None:
            pol = [[complex(c).real, complex(c).imag] for c in op.polarization]
        return {
            "type": "microwave",
            "kind": op.kind,
            "anchor": [str(op.anchor[0]), str(op.anchor[1])],
            "rabi_rad_s": op.rabi,
            "duration_s": op.duration,
            "detuning_rad_s": op.detuning,
            "phase_rad": op.phase,
            "polarization": pol,
            "site_mask": None if op.site_mask is None else list(op.site_mask),
        }


@dataclass(frozen=True)
class ShiftOutLight:
    """Site-selective 459-nm light: additive shifts of the f=4 and f=3 levels."""

    channel: ClassVar[str] = "shiftout"
    sites: Tuple[int, ...]
    shift_f4: float
    shift_f3: float = 0.0
    p_scat: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p_scat <= 1.0:
            raise SequenceError(f"scattering probability {self.p_scat} outside [0, 1]")

    def to_document(self) -> Dict[str, Any]:
        return {"type": "shiftout", "sites": list(self.sites), "shift_f4_rad_s": self.shift_f4,
                "shift_f3_rad_s": self.shift_f3, "p_scat": self.p_scat}


@dataclass(frozen=True)
class ReadoutLight:
    channel: ClassVar[str] = "readout"
    scatter: ScatterParams

    def to_document(self) -> Dict[str, Any]:
        s = self.scatter
        return {"type": "readout", "gamma_rad_s": s.gamma, "saturation": s.saturation,
                "detuning_rad_s": s.detuning}


@dataclass(frozen=True)
class TrapRamp:
    channel: ClassVar[str] = "trap"
    direction: str

    def __post_init__(self):
        if self.direction not in ("up", "down"):
            raise SequenceError(f"unknown ramp direction '{self.direction}'")

    def to_document(self) -> Dict[str, Any]:
        return {"type": "trap", "direction": self.direction}


@dataclass(frozen=True)
class CameraGate:
    channel: ClassVar[str] = "camera"

    def to_document(self) -> Dict[str, Any]:
        return {"type": "camera"}


@dataclass(frozen=True)
class Blowaway:
    channel: ClassVar[str] = "blowaway"
    error: float = 0.0

    def to_document(self) -> Dict[str, Any]:
        return {"type": "blowaway", "error": self.error}


Payload = Union[MicrowavePulse, ShiftOutLight, ReadoutLight, TrapRamp, CameraGate, Blowaway]


@dataclass(frozen=True)
class Event:
    id: int
    t_start: int      # ns
    duration: int     # ns
    payload: Payload
    section: str = "mcm"
    label: str = ""

    def __post_init__(self):
        if self.duration < 0:
            raise SequenceError(f"event {self.id} has negative duration")
        if self.t_start < 0:
            raise SequenceError(f"event {self.id} starts before t=0")

    @property
    def channel(self) -> str:
        return self.payload.channel

    @property
    def t_end(self) -> int:
        return self.t_start + self.duration

    @property
    def start_s(self) -> float:
        return self.t_start * 1e-9

    def to_document(self) -> Dict[str, Any]:
        return {
            "id": self.id,
            "t_start_ns": self.t_start,
            "duration_ns": self.duration,
            "channel": self.channel,
            "section": self.section,
            "label": self.label,
            "payload": self.payload.to_document(),
        }


@dataclass(frozen=True)
class SequenceIR:
    events: Tuple[Event, ...]
    ancilla: int = 4
    data_sites: Tuple[int, ...] = ()
    trap_plan: Optional[TrapPlan] = None
    trap_shift: float = 0.0   # extra f=4 shift of the ancilla at full ramp (rad/s)
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def pulses(self, section: Optional[str] = None) -> List[Event]:
        return [e for e in self.events
                if isinstance(e.payload, MicrowavePulse) and (section is None or e.section == section)]

    def of_type(self, kind) -> List[Event]:
        return [e for e in self.events if isinstance(e.payload, kind)]

    def section_span(self, section: str) -> Tuple[int, int]:
        events = [e for e in self.events if e.section == section]
        if not events:
            raise SequenceError(f"sequence has no '{section}' section")
        return min(e.t_start for e in events), max(e.t_end for e in events)

    @property
    def duration(self) -> int:
        return max((e.t_end for e in self.events), default=0)

    def counts(self) -> Dict[str, int]:
        return {
            "microwave_pulses": len(self.pulses()),
            "readout_pulses": len(self.pulses("mcm")),
            "echoes": sum(1 for e in self.pulses() if e.label == "echo-swap") // 3,
            "repump_cycles": sum(1 for e in self.pulses() if e.label == "repump-3,1"),
            "light_segments": len(self.of_type(ReadoutLight)),
        }

    @cached_property
    def _ramps(self) -> List[Event]:
        return self.of_type(TrapRamp)

    def ramp_fraction(self, t_ns: float) -> float:
        """Ancilla ramp progress in [0, 1] at absolute time ``t_ns``."""
        fraction = 0.0
        for event in self._ramps:
            if t_ns < event.t_start:
                break
            u = min((t_ns - event.t_start) / event.duration, 1.0) if event.duration else 1.0
            b = blackman_ramp(u)
            fraction = b if event.payload.direction == "up" else 1.0 - b
        return fraction

    def to_document(self) -> Dict[str, Any]:
        return {
            "schema_version": SCHEMA_VERSION,
            "ancilla": self.ancilla,
            "data_sites": list(self.data_sites),
            "trap_shift_rad_s": self.trap_shift,
            "trap_plan": None if self.trap_plan is None else self.trap_plan.summary(),
            "metadata": dict(self.metadata),
            "counts": self.counts(),
            "events": [e.to_document() for e in self.events],
        }

    def to_json(self) -> str:
        """Canonical serialization; identical configs give identical text."""
        return json.dumps(self.to_document(), indent=1, ensure_ascii=False) + "\n"


# --- building ----------------------------------------------------------------

def duration_ns(seconds: float) -> int:
    """Whole nanoseconds covering ``seconds``."""
    return int(math.ceil(round(seconds * 1e9, 6)))


class _Timeline:
    def __init__(self):
        self.events: List[Event] = []
        self.cursor = 0

    def add(self, payload: Payload, duration: int, section: str, label: str = "",
            t_start: Optional[int] = None, advance: bool = True) -> Event:
        start = self.cursor if t_start is None else t_start
        event = Event(len(self.events), start, duration, payload, section, label)
        self.events.append(event)
        if advance and t_start is None:
            self.cursor = start + duration
        return event

    def pulse(self, op: PulseOp, section: str) -> Event:
        return self.add(MicrowavePulse(op), duration_ns(op.duration), section, op.label)

    def pulses(self, ops: Iterable[PulseOp], section: str) -> List[Event]:
        return [self.pulse(op, section) for op in ops]

    def sorted_events(self) -> Tuple[Event, ...]:
        order = sorted(self.events, key=lambda e: (e.t_start, CHANNELS.index(e.channel), e.id))
        return tuple(replace(e, id=i) for i, e in enumerate(order))


def _pair(text: str) -> Tuple[LevelState, LevelState]:
    return parse_transition(text)


def _relabel(ops: Sequence[PulseOp], label: str) -> List[PulseOp]:
    return [replace(op, label=label) for op in ops]


def prep_pulses(config: RunConfig, chain: Sequence[str] = PREP_CHAIN) -> List[PulseOp]:
    """CORPSE chain from |4,4> down to |3,0>, one composite per step."""
    ops: List[PulseOp] = []
    for step in chain:
        a, b = _pair(step)
        ops += corpse((a, b), config.rabi(a, b), label=f"prep-{step}")
    return ops


def input_pulse(config: RunConfig, label: str) -> Optional[PulseOp]:
    rotation = INPUT_ROTATIONS[normalize_input(label)]
    if rotation is None:
        return None
    angle, phase = rotation
    return plain_pulse(CLOCK, config.rabi(*CLOCK), angle, phase, label="input")


def shelving_pulses(config: RunConfig) -> Tuple[List[PulseOp], Dict[str, float]]:
    """Horn pulse (pi on |3,0>-|4,-1>, 2 pi on |4,0>-|3,-1>) then two CORPSE to f=3."""
    drive = config.horn_drive()
    rabi_low = config.rabi(*SHELVE_LOWER_PAIR)
    solution = solve_horn_phase(drive, config.calibration.shelving_ratio, rabi_low)
    horn = plain_pulse(SHELVE_LOWER_PAIR, rabi_low, math.pi,
                       polarization=drive.polarization(solution.phase), label="shelve-horn")
    ops = [horn]
    ops += corpse((CLOCK[1], CLOCK[0]), config.rabi(*CLOCK), label="shelve-clock")
    ops += corpse(UNSHELVE_F4, config.rabi(*UNSHELVE_F4), label="shelve-f4")
    return ops, {"horn_phase": solution.phase, "horn_ratio": solution.ratio}


def _shiftout(config: RunConfig) -> Dict[str, float]:
    s = config.shiftout
    omega_mu = config.rabi(LevelState(3, -1), LevelState(4, 0))
    settings = shiftout_settings(s.epsilon, omega_mu, s.si("lifetime"), s.si("detuning"),
                                 config.physics.si("hyperfine"))
    if not s.scatter:
        settings["p_scat"] = 0.0
    return settings


def light_schedule(exposure_ns: int, repumps: int, echoes: int) -> List[Tuple[int, str]]:
    """Interruption points in light time: repump triplets and echo triplets.

    Echo k sits at (k + 1/2) T / N_echo, repump j at round((j + 1/2) T / N_repump).
    """
    points: List[Tuple[int, str]] = []
    if echoes:
        if exposure_ns % (2 * echoes):
            raise SequenceError(
                f"readout dwell {exposure_ns} ns cannot hold {echoes} evenly spaced echoes",
                details={"exposure_ns": exposure_ns, "echoes": echoes},
            )
        points += [((2 * k + 1) * exposure_ns // (2 * echoes), "echo") for k in range(echoes)]
    if repumps:
        points += [(int(round((j + 0.5) * exposure_ns / repumps)), "repump") for j in range(repumps)]
    # repumps before echoes on a tie
    return sorted(points, key=lambda p: (p[0], p[1] == "echo"))


def build_mcm_sequence(
    config: RunConfig,
    input_label: str = "0",
    output: Union[str, Tuple[float, float], None] = "inverse",
    compensation: Optional[float] = None,
    trap_shift: Optional[float] = None,
    include_mcm: bool = True,
) -> SequenceIR:
    """Compile the characterization circuit.

    ``output="inverse"`` undoes the input rotation after the measurement,
    including the measurement's phase ``compensation`` (computed from an ideal
    run when not given). A tuple ``(angle, phase)`` gives an explicit clock
    rotation; ``None`` leaves the data qubit unrotated.
    """
    label = normalize_input(input_label)
    seq = config.sequence
    plan = scale_trap_plan(seq.array_size, seq.si("depth_start"), seq.si("depth_ancilla"),
                           seq.hold, seq.si("ramp_duration"))
    ancilla = plan.ancilla_sites[len(plan.ancilla_sites) // 2]
    if trap_shift is None:
        from .calibration import ancilla_trap_shift
        trap_shift = ancilla_trap_shift(config) if include_mcm else 0.0

    line = _Timeline()
    metadata: Dict[str, Any] = {"input": label}

    line.pulses(prep_pulses(config), "prep")
    first = input_pulse(config, label)
    if first is not None:
        line.pulse(first, "input")

    if include_mcm:
        _build_mcm_section(config, line, plan, ancilla, trap_shift, metadata)

    if output == "inverse":
        rotation = INPUT_ROTATIONS[label]
        if rotation is not None:
            if compensation is None:
                compensation = compensation_phase(config) if include_mcm else 0.0
            angle, phase = rotation
            line.pulse(plain_pulse(CLOCK, config.rabi(*CLOCK), angle,
                                   (phase + math.pi + compensation) % (2.0 * math.pi),
                                   label="output"), "output")
        metadata["output"] = "inverse"
    elif output is not None:
        angle, phase = output
        line.pulse(plain_pulse(CLOCK, config.rabi(*CLOCK), angle, phase % (2.0 * math.pi),
                               label="output"), "output")
        metadata["output"] = [angle, phase % (2.0 * math.pi)]
    else:
        metadata["output"] = None
    metadata["compensation_phase"] = compensation

    error = config.spam.blowaway if config.spam.enabled else 0.0
    line.add(Blowaway(error), BLOWAWAY_NS, "blowaway", "blowaway")

    ir = SequenceIR(line.sorted_events(), ancilla, plan.data_sites, plan, trap_shift, metadata)
    logger.debug("compiled %s", ir.counts())
    return ir


def _build_mcm_section(config: RunConfig, line: _Timeline, plan: TrapPlan, ancilla: int,
                       trap_shift: float, metadata: Dict[str, Any]) -> None:
    seq = config.sequence
    clock_rabi = config.rabi(*CLOCK)
    ramp_ns = duration_ns(plan.duration)
    scatter = config.scatter_params("mid-circuit")
    shift = _shiftout(config)

    line.add(TrapRamp("up"), ramp_ns, "mcm", "ramp-up")
    line.pulses(corpse(CLOCK, clock_rabi, label="clock-compensate"), "mcm")

    shelve, horn = shelving_pulses(config)
    metadata.update(horn)
    metadata["shiftout"] = shift

    def place(ops: Sequence[PulseOp]) -> None:
        for op in ops:
            start = line.cursor
            event = line.pulse(op, "mcm")
            if op.label.endswith("horn"):
                line.add(ShiftOutLight((ancilla,), shift["shift_f4"], shift["shift_f3"], shift["p_scat"]),
                         event.duration, "mcm", "shiftout-" + op.label, t_start=start)

    place(shelve)

    # readout: light segments interleaved with repump and echo triplets
    exposure = duration_ns(config.readout.si("exposure"))
    repump_ops = []
    for a, b in REPUMP_PAIRS:
        lower, upper = split_pair(a, b)
        repump_ops.append(plain_pulse((a, b), config.rabi(a, b), math.pi,
                                      label=f"repump-{lower.f},{lower.m}"))
    echo_first, echo_swap, echo_last = echo_triplet(config)
    swap_duration = sum(op.duration for op in echo_swap)
    horn_duration = shelve[0].duration
    p_echo = 0.0
    if shift["dls"] != 0:
        p_echo = min(1.0, shift["p_scat"] * abs(trap_shift / shift["dls"]) * swap_duration / horn_duration)

    camera_start = line.cursor
    light_time = 0
    for point, kind in light_schedule(exposure, seq.repumps, seq.echoes) + [(exposure, "end")]:
        if point > light_time:
            line.add(ReadoutLight(scatter), point - light_time, "mcm", "light")
            light_time = point
        if kind == "repump":
            line.pulses(repump_ops, "mcm")
        elif kind == "echo":
            line.pulses(echo_first, "mcm")
            start = line.cursor
            events = line.pulses(echo_swap, "mcm")
            if config.shiftout.echo_compensation and trap_shift != 0:
                span = sum(e.duration for e in events)
                line.add(ShiftOutLight((ancilla,), -trap_shift, 0.0, p_echo), span, "mcm",
                         "shiftout-echo", t_start=start)
            line.pulses(echo_last, "mcm")
    line.add(CameraGate(), line.cursor - camera_start, "mcm", "camera", t_start=camera_start)

    place(_relabel_unshelve(invert_pulses(shelve)))
    line.add(TrapRamp("down"), ramp_ns, "mcm", "ramp-down")
    line.pulses(corpse((CLOCK[1], CLOCK[0]), clock_rabi, label="clock-restore"), "mcm")
    metadata.update({"echoes": seq.echoes, "repump_cycles": seq.repumps, "exposure_ns": exposure})


def _relabel_unshelve(ops: Sequence[PulseOp]) -> List[PulseOp]:
    return [replace(op, label=op.label.replace("shelve", "unshelve")) for op in ops]


def build_reinit_sequence(config: RunConfig, ancilla: Optional[int] = None) -> SequenceIR:
    """Two-step reset of a bright ancilla: global CORPSE chain |4,4> -> |4,1>, then a
    site-selective |4,1> -> |3,0> composite on the ancilla only."""
    seq = config.sequence
    plan = scale_trap_plan(seq.array_size, seq.si("depth_start"), seq.si("depth_ancilla"),
                           seq.hold, seq.si("ramp_duration"))
    site = plan.ancilla_sites[len(plan.ancilla_sites) // 2] if ancilla is None else ancilla
    line = _Timeline()
    line.pulses(prep_pulses(config, PREP_CHAIN[:-1]), "reinit")
    a, b = _pair(PREP_CHAIN[-1])
    line.pulses(corpse((a, b), config.rabi(a, b), site_mask=(site,), label="reinit-selective"), "reinit")
    return SequenceIR(line.sorted_events(), site, plan.data_sites, plan, 0.0, {"preset": "reinit"})


def echo_triplet(config: RunConfig) -> Tuple[List[PulseOp], List[PulseOp], List[PulseOp]]:
    """CORPSE clock, swap and clock-back pulses exchanging |3,0> and |3,-1>."""
    clock_rabi = config.rabi(*CLOCK)
    return (corpse(CLOCK, clock_rabi, label="echo-clock"),
            corpse(ECHO_SWAP, config.rabi(*ECHO_SWAP), label="echo-swap"),
            corpse((CLOCK[1], CLOCK[0]), clock_rabi, label="echo-clock"))


def build_dwell_sequence(scatter: ScatterParams, exposure: float, ancilla: int = 0) -> SequenceIR:
    """A single continuous light dwell, as used for occupation images."""
    line = _Timeline()
    ns = duration_ns(exposure)
    line.add(ReadoutLight(scatter), ns, "mcm", "light", t_start=0, advance=False)
    line.add(CameraGate(), ns, "mcm", "camera", t_start=0)
    return SequenceIR(line.sorted_events(), ancilla, (), None, 0.0, {"preset": "dwell"})


def compensation_phase(config: RunConfig) -> float:
    """Relative clock-state phase the ideal measurement section imprints on a data qubit."""
    from .executor import ideal_section_unitary

    ir = build_mcm_sequence(config, "0", output=None, compensation=0.0)
    site = ir.data_sites[0]
    M = ideal_section_unitary(ir, config.environment(), site, "mcm",
                              window=config.calibration.window)
    theta = math.atan2(M[1, 1].imag, M[1, 1].real) - math.atan2(M[0, 0].imag, M[0, 0].real)
    return theta % (2.0 * math.pi)


# --- validation --------------------------------------------------------------

@dataclass
class ValidationReport:
    checks: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(c["status"] == "pass" for c in self.checks)

    def add(self, name: str, passed: bool, message: str = "", events: Sequence[int] = ()):
        self.checks.append({"check": name, "status": "pass" if passed else "fail",
                            "message": message, "events": list(events)})

    @property
    def failures(self) -> List[Dict[str, Any]]:
        return [c for c in self.checks if c["status"] == "fail"]

    def to_document(self) -> Dict[str, Any]:
        return {"ok": self.ok, "checks": self.checks}


def validate(ir: SequenceIR, expected: Optional[Mapping[str, int]] = None) -> ValidationReport:
    """Channel exclusivity, transition frames and pulse counts. Never raises."""
    report = ValidationReport()

    for channel in CHANNELS:
        events = sorted((e for e in ir.events if e.channel == channel), key=lambda e: (e.t_start, e.id))
        clashes = []
        for prev, cur in zip(events, events[1:]):
            if cur.t_start < prev.t_end:
                # shift-outs on disjoint sites may overlap
                if channel == "shiftout" and not set(prev.payload.sites) & set(cur.payload.sites):
                    continue
                clashes.append((prev.id, cur.id))
        if clashes:
            for a, b in clashes:
                report.add(f"exclusive:{channel}", False,
                           f"events {a} and {b} overlap on the {channel} channel", (a, b))
        else:
            report.add(f"exclusive:{channel}", True)

    bad_frames = []
    for event in ir.pulses():
        op = event.payload.op
        lower, upper = op.lower, op.upper
        if abs(upper.m - lower.m) > 1:
            bad_frames.append((event.id, f"|{lower}> <-> |{upper}> has |Delta m_f| > 1"))
            continue
        if mw_coupling(lower, upper, op.effective_polarization()) == 0:
            bad_frames.append((event.id, f"polarization does not drive |{lower}> <-> |{upper}>"))
    if bad_frames:
        for event_id, message in bad_frames:
            report.add("frame", False, f"event {event_id}: {message}", (event_id,))
    else:
        report.add("frame", True)

    counts = ir.counts()
    targets = dict(expected or {})
    for key in ("echoes", "repump_cycles"):
        if key in ir.metadata:
            targets.setdefault(key, ir.metadata[key])
    for key, target in targets.items():
        actual = counts.get(key)
        report.add(f"count:{key}", actual == target, f"{key} = {actual}, expected {target}")
    return report
