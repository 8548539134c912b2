"""Walk a SequenceIR for one site and evolve its 16-level state.

Sites never interact, so every site is walked on its own. Readout light is
handed to an optional callback (the stochastic readout model); without one the
light segments are free evolution, which is the ideal mode used for phase
compensation and process fidelities.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Collection, Optional, Sequence, Tuple

import numpy as np

from .atomic_model import F3_INDICES, F4_INDICES, LEVELS, N_LEVELS, QUBIT_0, QUBIT_1, FieldEnvironment
from .pulse_engine import (
    DEFAULT_WINDOW,
    AtomState,
    NoiseDeviate,
    Propagator,
    carrier_offset,
    plain_pulse,
)
from .sequence import CLOCK, Blowaway, Event, MicrowavePulse, ReadoutLight, SequenceIR, ShiftOutLight

logger = logging.getLogger(__name__)

LightHandler = Callable[[int, AtomState, Event], AtomState]


@dataclass
class SiteOutcome:
    state: AtomState
    time: float            # seconds, where the state's clock stopped
    scattered: bool = False
    reached_blowaway: bool = False


def _shift_vector(f4: float, f3: float) -> Optional[np.ndarray]:
    if f4 == 0 and f3 == 0:
        return None
    shifts = np.zeros(N_LEVELS)
    shifts[list(F4_INDICES)] = f4
    shifts[list(F3_INDICES)] = f3
    return shifts


class SiteContext:
    """Level shifts seen by one site: ancilla trap ramp plus shift-out windows."""

    def __init__(self, ir: SequenceIR, site: int, events: Sequence[Event]):
        self.ir = ir
        self.site = site
        self.windows = [e for e in events
                        if isinstance(e.payload, ShiftOutLight) and site in e.payload.sites]

    def shifts_at(self, t_ns: float) -> Optional[np.ndarray]:
        f4 = f3 = 0.0
        if self.site == self.ir.ancilla and self.ir.trap_shift:
            f4 += self.ir.trap_shift * self.ir.ramp_fraction(t_ns)
        for window in self.windows:
            if window.t_start <= t_ns < window.t_end:
                f4 += window.payload.shift_f4
                f3 += window.payload.shift_f3
        return _shift_vector(f4, f3)


def run_site(
    ir: SequenceIR,
    site: int,
    state: AtomState,
    propagator: Propagator,
    light: Optional[LightHandler] = None,
    rng: Optional[np.random.Generator] = None,
    sections: Optional[Collection[str]] = None,
) -> SiteOutcome:
    """Evolve ``state`` through the events of ``sections`` (all when None).

    Stops at a blowaway event or when the atom is lost. Shift-out scattering
    is only sampled when an ``rng`` is given.
    """
    events = [e for e in ir.events if sections is None or e.section in sections]
    ctx = SiteContext(ir, site, events)
    clock = events[0].start_s if events else 0.0
    scattered = False

    def idle(s: AtomState, t_from: float, t_to: float) -> AtomState:
        if t_to <= t_from or s.lost:
            return s
        mid_ns = 0.5 * (t_from + t_to) * 1e9
        return propagator.idle(s, t_to - t_from, ctx.shifts_at(mid_ns))

    for event in events:
        payload = event.payload
        if state.lost:
            break
        if isinstance(payload, Blowaway):
            return SiteOutcome(state, clock, scattered, True)
        if isinstance(payload, MicrowavePulse):
            op = payload.op
            if not op.applies_to(site):
                continue
            t0 = event.start_s
            state = idle(state, clock, t0)
            shifts = ctx.shifts_at(event.t_start + 0.5 * event.duration)
            state = propagator.pulse(state, op, t0, shifts)
            clock = t0 + op.duration
        elif isinstance(payload, ShiftOutLight):
            if rng is not None and site in payload.sites and payload.p_scat > 0:
                if rng.random() < payload.p_scat:
                    level = LEVELS[int(rng.integers(N_LEVELS))]
                    state = AtomState.from_level(level, state.e_mot)
                    scattered = True
        elif isinstance(payload, ReadoutLight):
            t0 = event.start_s
            t1 = t0 + event.duration * 1e-9
            state = idle(state, clock, t0)
            state = idle(state, t0, t1)
            clock = t1
            if light is not None:
                state = light(site, state, event)
    return SiteOutcome(state, clock, scattered, False)


def clock_frame(env: FieldEnvironment, t: float) -> np.ndarray:
    """diag(1, exp(i Delta_c t)) for the clock carrier, basis (|0>, |1>)."""
    delta_c = carrier_offset(plain_pulse(CLOCK, 1.0), env)
    return np.array([1.0, np.exp(1j * delta_c * t)])


def section_map(ir: SequenceIR, env: FieldEnvironment, site: int, section: str,
                deviate: NoiseDeviate = NoiseDeviate(), window: float = DEFAULT_WINDOW) -> np.ndarray:
    """2x2 block of the section's map on the clock qubit, in the clock carrier frame."""
    propagator = Propagator(env, deviate, window)
    start, end = ir.section_span(section)
    t_start, t_end = start * 1e-9, end * 1e-9
    M = np.zeros((2, 2), dtype=complex)
    for j, level in enumerate((QUBIT_0, QUBIT_1)):
        outcome = run_site(ir, site, AtomState.from_level(level), propagator, sections={section})
        state = propagator.idle(outcome.state, t_end - outcome.time)
        M[0, j] = state.amp[QUBIT_0.index]
        M[1, j] = state.amp[QUBIT_1.index]
    return clock_frame(env, t_end)[:, None] * M / clock_frame(env, t_start)[None, :]


def ideal_section_unitary(ir: SequenceIR, env: FieldEnvironment, site: int, section: str = "mcm",
                          window: float = DEFAULT_WINDOW) -> np.ndarray:
    return section_map(ir, env, site, section, NoiseDeviate(), window)


def phase_gate_fidelity(M: np.ndarray) -> Tuple[float, float]:
    """Process fidelity against the best-fit phase gate, and that gate's phase."""
    fidelity = ((abs(M[0, 0]) + abs(M[1, 1])) / 2.0) ** 2
    phase = float(np.angle(M[1, 1]) - np.angle(M[0, 0])) % (2.0 * np.pi)
    return float(fidelity), phase


def averaged_coherence(ir: SequenceIR, env: FieldEnvironment, site: int, section: str,
                       deviates: Sequence[NoiseDeviate], weights: Sequence[float],
                       window: float = DEFAULT_WINDOW) -> float:
    """2 |<rho_01>| of an equal superposition after the section, averaged over deviates."""
    rho01 = 0j
    for deviate, weight in zip(deviates, weights):
        M = section_map(ir, env, site, section, deviate, window)
        psi = (M[:, 0] + M[:, 1]) / np.sqrt(2.0)
        rho01 += weight * psi[0] * np.conj(psi[1])
    return float(2.0 * abs(rho01))
