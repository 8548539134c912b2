"""Unitary evolution of the 16-level ground manifold under microwave pulses.

Amplitudes are kept in the frame rotating at +-omega_q/2 (f=4 / f=3), so a
free atom only accumulates its Zeeman phase. A pulse with carrier
omega_q + Delta_c is time independent after the extra transformation
D(t) = exp(i Delta_c t) on the f=4 block, which gives

    a(t0 + tau) = D(t0 + tau)^-1 expm(-i H_b tau) D(t0) a(t0).

Pulse phases therefore refer to one continuous oscillator per carrier,
started at t = 0 of the schedule.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.linalg import expm
from scipy.optimize import brentq, minimize_scalar

from .atomic_model import (
    F4_INDICES,
    LEVELS,
    N_LEVELS,
    FieldEnvironment,
    LevelState,
    cross_manifold_pairs,
    level_index,
    mw_coupling,
    pure_polarization,
    split_pair,
    zeeman_energy,
)
from .errors import DomainError, SolverError

logger = logging.getLogger(__name__)

NORM_TOLERANCE = 1e-9
DEFAULT_WINDOW = 100.0

CORPSE_ANGLES = (7.0 * math.pi / 3.0, 5.0 * math.pi / 3.0, math.pi / 3.0)  # 420, 300, 60 deg
CORPSE_PHASE_OFFSETS = (0.0, math.pi, 0.0)

SHELVE_LOWER_PAIR = (LevelState(3, 0), LevelState(4, -1))   # pi rotation
SHELVE_UPPER_PAIR = (LevelState(3, -1), LevelState(4, 0))   # 2 pi rotation


# --- State -------------------------------------------------------------------

@dataclass
class AtomState:
    amp: np.ndarray
    lost: bool = False
    e_mot: float = 0.0  # motional energy / k_B (kelvin)

    @classmethod
    def from_level(cls, level: LevelState, e_mot: float = 0.0) -> "AtomState":
        amp = np.zeros(N_LEVELS, dtype=complex)
        amp[level.index] = 1.0
        return cls(amp, False, e_mot)

    @classmethod
    def superposition(cls, weights: Dict[LevelState, complex], e_mot: float = 0.0) -> "AtomState":
        amp = np.zeros(N_LEVELS, dtype=complex)
        for level, value in weights.items():
            amp[level.index] = value
        amp /= np.linalg.norm(amp)
        return cls(amp, False, e_mot)

    def copy(self) -> "AtomState":
        return AtomState(self.amp.copy(), self.lost, self.e_mot)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amp))

    def populations(self) -> np.ndarray:
        return np.abs(self.amp) ** 2

    def population(self, level: LevelState) -> float:
        return float(abs(self.amp[level.index]) ** 2)

    def manifold_population(self, f: int) -> float:
        pops = self.populations()
        return float(pops[7:].sum() if f == 4 else pops[:7].sum())

    def check_normalized(self):
        if self.lost:
            raise DomainError("atom is lost")
        if abs(self.norm - 1.0) > NORM_TOLERANCE:
            raise DomainError(f"state is not normalized (|amp| = {self.norm:.12f})")


# --- Drive description -------------------------------------------------------

@dataclass(frozen=True)
class HornDrive:
    """Two microwave horns with fixed polarization triples (sigma-, pi, sigma+).

    The synthesized field is amp_a * pol_a + amp_b * exp(i phase) * pol_b.
    """

    pol_a: Tuple[complex, complex, complex] = (0.6, 0.0, 0.8)
    pol_b: Tuple[complex, complex, complex] = (0.8, 0.0, 0.6)
    amp_a: complex = 1.0
    amp_b: complex = 0.707
    phase: float = 0.0

    def polarization(self, phase: Optional[float] = None) -> Tuple[complex, complex, complex]:
        phi = self.phase if phase is None else phase
        rot = complex(math.cos(phi), math.sin(phi))
        return tuple(
            complex(self.amp_a) * complex(a) + complex(self.amp_b) * rot * complex(b)
            for a, b in zip(self.pol_a, self.pol_b)
        )

    def with_phase(self, phase: float) -> "HornDrive":
        return replace(self, phase=float(phase) % (2.0 * math.pi))


@dataclass(frozen=True)
class PulseOp:
    kind: str
    anchor: Tuple[LevelState, LevelState]
    rabi: float
    duration: float
    detuning: float = 0.0
    phase: float = 0.0
    polarization: Optional[Tuple[complex, complex, complex]] = None
    site_mask: Optional[Tuple[int, ...]] = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("plain", "corpse-segment"):
            raise DomainError(f"unknown pulse kind '{self.kind}'")
        if self.duration < 0:
            raise DomainError(f"pulse duration must be >= 0, got {self.duration}")
        if self.rabi < 0:
            raise DomainError(f"Rabi frequency must be >= 0, got {self.rabi}")
        split_pair(*self.anchor)

    @property
    def angle(self) -> float:
        return self.rabi * self.duration

    @property
    def lower(self) -> LevelState:
        return split_pair(*self.anchor)[0]

    @property
    def upper(self) -> LevelState:
        return split_pair(*self.anchor)[1]

    def effective_polarization(self) -> Tuple[complex, complex, complex]:
        if self.polarization is not None:
            return self.polarization
        return pure_polarization(*self.anchor)

    def applies_to(self, site: int) -> bool:
        return self.site_mask is None or site in self.site_mask


@dataclass(frozen=True)
class NoiseModel:
    """Quasi-static per-shot deviates.

    ``sigma_zeeman`` is the std of mu_B dB / hbar (rad/s); a level |f, m> is
    shifted by g_f m times the deviate. ``sigma_amplitude`` is the fractional
    std of all microwave Rabi frequencies.
    """

    sigma_zeeman: float = 0.0
    sigma_amplitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.sigma_zeeman < 0 or self.sigma_amplitude < 0:
            raise DomainError("noise widths must be >= 0")


@dataclass(frozen=True)
class NoiseDeviate:
    zeeman: float = 0.0
    amplitude: float = 0.0


NOISE_STREAM = 0
READOUT_STREAM = 1


def shot_rng(seed: int, shot: int, stream: int = READOUT_STREAM) -> np.random.Generator:
    """Independent generator per (seed, shot, stream); order of shots is irrelevant."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(shot), int(stream)]))


def sample_noise(model: NoiseModel, shot: int) -> NoiseDeviate:
    if model.sigma_zeeman == 0 and model.sigma_amplitude == 0:
        return NoiseDeviate()
    rng = shot_rng(model.seed, shot, NOISE_STREAM)
    z, a = rng.standard_normal(2)
    return NoiseDeviate(zeeman=model.sigma_zeeman * z, amplitude=model.sigma_amplitude * a)


def gauss_hermite(n: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and normalized weights for averaging over a standard normal deviate."""
    nodes, weights = hermegauss(n)
    return nodes, weights / weights.sum()


# --- Hamiltonian -------------------------------------------------------------

def frame_energies(env: FieldEnvironment, deviate: NoiseDeviate = NoiseDeviate(),
                   level_shifts: Optional[np.ndarray] = None) -> np.ndarray:
    """Diagonal energies in the +-omega_q/2 frame, including noise and light shifts."""
    energies = np.empty(N_LEVELS)
    for i, level in enumerate(LEVELS):
        sign = 1.0 if level.f == 4 else -1.0
        energies[i] = zeeman_energy(level, env) - sign * env.omega_q / 2.0
        energies[i] += env.g_f(level.f) * level.m * deviate.zeeman
    if level_shifts is not None:
        energies = energies + level_shifts
    return energies


def carrier_offset(op: PulseOp, env: FieldEnvironment) -> float:
    """Carrier minus omega_q for the pulse (rad/s)."""
    lower, upper = op.lower, op.upper
    return zeeman_energy(upper, env) - zeeman_energy(lower, env) - env.omega_q + op.detuning


def coupled_pairs(op: PulseOp, env: FieldEnvironment, window: float = DEFAULT_WINDOW):
    """Pairs kept by the rotating-wave window, with their relative couplings.

    Yields (lower_index, upper_index, coupling) where coupling is normalized to
    the anchor pair.
    """
    pol = op.effective_polarization()
    c_anchor = mw_coupling(op.lower, op.upper, pol)
    if c_anchor == 0:
        raise DomainError(
            f"polarization {pol} does not drive the anchor |{op.lower}> <-> |{op.upper}>"
        )
    carrier = carrier_offset(op, env) + env.omega_q
    cutoff = window * op.rabi
    scale = c_anchor.conjugate() / abs(c_anchor) ** 2
    pairs = []
    for lower, upper in cross_manifold_pairs():
        c = mw_coupling(lower, upper, pol)
        if c == 0:
            continue
        omega_pair = zeeman_energy(upper, env) - zeeman_energy(lower, env)
        if abs(omega_pair - carrier) >= cutoff and (lower, upper) != (op.lower, op.upper):
            continue
        pairs.append((lower.index, upper.index, c * scale))
    return pairs


def drive_hamiltonian(op: PulseOp, env: FieldEnvironment, deviate: NoiseDeviate = NoiseDeviate(),
                      level_shifts: Optional[np.ndarray] = None,
                      window: float = DEFAULT_WINDOW) -> Tuple[np.ndarray, float]:
    """Time-independent Hamiltonian H_b and the carrier offset Delta_c."""
    delta_c = carrier_offset(op, env)
    energies = frame_energies(env, deviate, level_shifts)
    energies[list(F4_INDICES)] -= delta_c
    H = np.diag(energies).astype(complex)
    rabi = op.rabi * (1.0 + deviate.amplitude)
    drive = 0.5 * rabi * complex(math.cos(op.phase), math.sin(op.phase))
    for lo, up, c in coupled_pairs(op, env, window):
        H[up, lo] += drive * c
        H[lo, up] += (drive * c).conjugate()
    return H, delta_c


def _frame_phase(delta_c: float, t: float) -> np.ndarray:
    d = np.ones(N_LEVELS, dtype=complex)
    d[7:] = np.exp(1j * delta_c * t)
    return d


def pulse_unitary(op: PulseOp, env: FieldEnvironment, deviate: NoiseDeviate = NoiseDeviate(),
                  level_shifts: Optional[np.ndarray] = None, t0: float = 0.0,
                  window: float = DEFAULT_WINDOW) -> np.ndarray:
    """Full 16x16 unitary of a pulse starting at absolute time ``t0``."""
    H, delta_c = drive_hamiltonian(op, env, deviate, level_shifts, window)
    core = expm(-1j * H * op.duration)
    d0 = _frame_phase(delta_c, t0)
    d1 = _frame_phase(delta_c, t0 + op.duration)
    return (core * d0[np.newaxis, :]) / d1[:, np.newaxis]


def apply_pulse(state: AtomState, op: PulseOp, env: FieldEnvironment,
                drive: Optional[HornDrive] = None, deviate: NoiseDeviate = NoiseDeviate(),
                level_shifts: Optional[np.ndarray] = None, t0: float = 0.0,
                window: float = DEFAULT_WINDOW) -> AtomState:
    """Advance ``state`` through one pulse. ``drive`` overrides the pulse polarization."""
    state.check_normalized()
    if op.duration == 0:
        return state.copy()
    if drive is not None:
        op = replace(op, polarization=drive.polarization())
    U = pulse_unitary(op, env, deviate, level_shifts, t0, window)
    return AtomState(U @ state.amp, state.lost, state.e_mot)


def apply_schedule(state: AtomState, ops: Sequence[PulseOp], env: FieldEnvironment,
                   deviate: NoiseDeviate = NoiseDeviate(), t0: float = 0.0,
                   window: float = DEFAULT_WINDOW) -> AtomState:
    """Back-to-back pulses that share one carrier, composed in the carrier frame."""
    state.check_normalized()
    if not ops:
        return state.copy()
    offsets = {round(carrier_offset(op, env), 6) for op in ops}
    if len(offsets) != 1:
        raise DomainError("apply_schedule needs pulses sharing one carrier")
    total = np.eye(N_LEVELS, dtype=complex)
    duration = 0.0
    delta_c = carrier_offset(ops[0], env)
    for op in ops:
        H, _ = drive_hamiltonian(op, env, deviate, None, window)
        total = expm(-1j * H * op.duration) @ total
        duration += op.duration
    amp = total @ (_frame_phase(delta_c, t0) * state.amp)
    amp = amp / _frame_phase(delta_c, t0 + duration)
    return AtomState(amp, state.lost, state.e_mot)


def free_evolve(state: AtomState, duration: float, energies: np.ndarray) -> AtomState:
    amp = state.amp * np.exp(-1j * energies * duration)
    return AtomState(amp, state.lost, state.e_mot)


class Propagator:
    """Per-shot evolution with cached pulse cores.

    Noise deviates are frozen for the lifetime of the object, so identical
    pulses under identical light shifts reuse one matrix exponential.
    """

    def __init__(self, env: FieldEnvironment, deviate: NoiseDeviate = NoiseDeviate(),
                 window: float = DEFAULT_WINDOW):
        self.env = env
        self.deviate = deviate
        self.window = window
        self._cores: Dict[tuple, Tuple[np.ndarray, np.ndarray, np.ndarray, float]] = {}
        self._base_energies = frame_energies(env, deviate)

    def energies(self, level_shifts: Optional[np.ndarray] = None) -> np.ndarray:
        if level_shifts is None:
            return self._base_energies
        return self._base_energies + level_shifts

    def _core(self, op: PulseOp, level_shifts: Optional[np.ndarray]):
        shift_key = None if level_shifts is None else tuple(np.round(level_shifts, 6))
        key = (op.anchor, op.rabi, op.duration, op.detuning, op.phase, op.polarization, shift_key)
        cached = self._cores.get(key)
        if cached is not None:
            return cached
        H, delta_c = drive_hamiltonian(op, self.env, self.deviate, level_shifts, self.window)
        # only the coupled block needs a matrix exponential
        off = np.abs(H - np.diag(np.diag(H))) > 0
        block = np.flatnonzero(off.any(axis=0) | off.any(axis=1))
        diag = np.exp(-1j * np.diag(H).real * op.duration)
        sub = expm(-1j * H[np.ix_(block, block)] * op.duration) if block.size else None
        cached = (block, sub, diag, delta_c)
        self._cores[key] = cached
        return cached

    def pulse(self, state: AtomState, op: PulseOp, t0: float,
              level_shifts: Optional[np.ndarray] = None) -> AtomState:
        if op.duration == 0:
            return state
        block, sub, diag, delta_c = self._core(op, level_shifts)
        amp = state.amp * _frame_phase(delta_c, t0)
        out = diag * amp
        if sub is not None:
            out[block] = sub @ amp[block]
        out = out / _frame_phase(delta_c, t0 + op.duration)
        return AtomState(out, state.lost, state.e_mot)

    def idle(self, state: AtomState, duration: float,
             level_shifts: Optional[np.ndarray] = None) -> AtomState:
        if duration <= 0:
            return state
        return free_evolve(state, duration, self.energies(level_shifts))


# --- Composite pulses --------------------------------------------------------

def plain_pulse(transition: Tuple[LevelState, LevelState], rabi: float, angle: float = math.pi,
                phase: float = 0.0, detuning: float = 0.0, polarization=None,
                site_mask=None, label: str = "") -> PulseOp:
    if rabi <= 0:
        raise DomainError(f"Rabi frequency must be > 0, got {rabi}")
    return PulseOp("plain", tuple(transition), rabi, angle / rabi, detuning, phase,
                   polarization, site_mask, label)


def corpse(transition: Tuple[LevelState, LevelState], rabi: float, phase: float = 0.0,
           detuning: float = 0.0, polarization=None, site_mask=None, label: str = "") -> List[PulseOp]:
    """CORPSE pi pulse: 420, 300, 60 degree segments with phases phi, phi+pi, phi."""
    if rabi <= 0:
        raise DomainError(f"Rabi frequency must be > 0, got {rabi}")
    return [
        PulseOp("corpse-segment", tuple(transition), rabi, angle / rabi, detuning,
                (phase + offset) % (2.0 * math.pi), polarization, site_mask, label)
        for angle, offset in zip(CORPSE_ANGLES, CORPSE_PHASE_OFFSETS)
    ]


def invert_pulses(ops: Sequence[PulseOp]) -> List[PulseOp]:
    """Reverse order, phases advanced by pi (exact inverse on resonance)."""
    return [replace(op, phase=(op.phase + math.pi) % (2.0 * math.pi)) for op in reversed(ops)]


def inverse_corpse(segments: Sequence[PulseOp]) -> List[PulseOp]:
    return invert_pulses(segments)


# --- Two-level helpers -------------------------------------------------------

def two_level_unitary(rabi: float, detuning: float, phase: float, duration: float) -> np.ndarray:
    """Basis (lower, upper); upper sits at -detuning in the carrier frame."""
    H = np.array([
        [0.0, 0.5 * rabi * np.exp(-1j * phase)],
        [0.5 * rabi * np.exp(1j * phase), -detuning],
    ], dtype=complex)
    return expm(-1j * H * duration)


def two_level_transfer(rabi: float, detuning: float, duration: float) -> float:
    """Detuned Rabi formula (Omega^2/W^2) sin^2(W t / 2), W^2 = Omega^2 + delta^2."""
    w2 = rabi ** 2 + detuning ** 2
    if w2 == 0:
        return 0.0
    return rabi ** 2 / w2 * math.sin(math.sqrt(w2) * duration / 2.0) ** 2


def composite_transfer(ops: Sequence[PulseOp], detuning: float = 0.0) -> float:
    """Population transfer of a segment list on an isolated pair at extra detuning."""
    U = np.eye(2, dtype=complex)
    for op in ops:
        U = two_level_unitary(op.rabi, op.detuning + detuning, op.phase, op.duration) @ U
    return float(abs(U[1, 0]) ** 2)


# --- Shelving solvers --------------------------------------------------------

def horn_ratio(drive: HornDrive, phase: Optional[float] = None) -> float:
    """Omega(|4,0> <-> |3,-1>) / Omega(|3,0> <-> |4,-1>) for the synthesized field."""
    pol = drive.polarization(phase)
    num = abs(mw_coupling(*SHELVE_UPPER_PAIR, pol))
    den = abs(mw_coupling(*SHELVE_LOWER_PAIR, pol))
    if den == 0:
        return math.inf
    return num / den


def achievable_ratio_interval(drive: HornDrive, samples: int = 1441) -> Tuple[float, float]:
    phases = np.linspace(0.0, 2.0 * math.pi, samples)
    ratios = np.array([horn_ratio(drive, p) for p in phases])
    return float(ratios.min()), float(ratios.max())


@dataclass(frozen=True)
class HornSolution:
    phase: float
    ratio: float
    duration: float
    interval: Tuple[float, float]


def solve_horn_phase(drive: HornDrive, ratio: float = 2.0, rabi: float = 2.0 * math.pi * 22.4e3,
                     samples: int = 1441) -> HornSolution:
    """Horn phase giving Omega(|4,0>-|3,-1>) = ratio * Omega(|3,0>-|4,-1>).

    ``rabi`` is the |3,0> <-> |4,-1> Rabi frequency; the returned duration is
    its pi time, during which the partner transition turns by ratio * pi.
    """
    if ratio <= 0:
        raise SolverError(f"ratio must be > 0, got {ratio}")
    low, high = achievable_ratio_interval(drive, samples)
    if not low <= ratio <= high:
        raise SolverError(
            f"ratio {ratio:g} unreachable; achievable interval is [{low:.6g}, {high:.6g}]",
            details={"interval": [low, high], "target": ratio},
        )
    phases = np.linspace(0.0, 2.0 * math.pi, samples)
    residual = np.array([horn_ratio(drive, p) - ratio for p in phases])
    for i in range(samples - 1):
        a, b = residual[i], residual[i + 1]
        if not (np.isfinite(a) and np.isfinite(b)):
            continue
        if a == 0:
            phase = float(phases[i])
            break
        if a * b < 0:
            phase = brentq(lambda p: horn_ratio(drive, p) - ratio, phases[i], phases[i + 1],
                           xtol=1e-15, rtol=4 * np.finfo(float).eps)
            break
    else:
        raise SolverError(f"no horn phase bracket found for ratio {ratio:g}")
    achieved = horn_ratio(drive, phase)
    logger.debug("horn phase %.9f rad gives ratio %.9f", phase, achieved)
    return HornSolution(float(phase), achieved, math.pi / rabi, (low, high))


@dataclass(frozen=True)
class TwoPulseSolution:
    detuning: float
    duration: float
    phase: float
    transfer: float
    return_probability: float


def _equator_residual(d: float, r: float) -> float:
    w = math.sqrt(1.0 + d * d)
    wr = math.sqrt(r * r + d * d)
    return r * r / (r * r + d * d) * math.sin(wr * math.pi / w) ** 2 - 0.5


def two_pulse_shelving_solve(ratio: float, rabi2: float = 1.0, d_max: float = 20.0,
                             step: float = 1e-3) -> TwoPulseSolution:
    """Two equal detuned pulses: 2 pi on |3,0>-|4,-1> each, |4,0> -> |3,-1> overall.

    ``ratio`` is Omega1/Omega2 with Omega1 on |4,0>-|3,-1>. Returns the
    smallest non-negative detuning solution.
    """
    if not 0.25 <= ratio <= 0.75:
        raise SolverError(
            f"Rabi ratio {ratio:g} outside the admissible interval [1/4, 3/4]",
            details={"ratio": ratio, "interval": [0.25, 0.75]},
        )
    g0 = _equator_residual(0.0, ratio)
    if abs(g0) <= 1e-12:
        d = 0.0
    else:
        grid = np.arange(step, d_max + step, step)
        prev = g0
        d = None
        for lo, hi in zip(np.concatenate(([0.0], grid[:-1])), grid):
            cur = _equator_residual(float(hi), ratio)
            if prev * cur <= 0:
                d = brentq(_equator_residual, lo, hi, args=(ratio,), xtol=1e-14)
                break
            prev = cur
        if d is None:
            raise SolverError(f"no equator condition found for ratio {ratio:g}")
    detuning = d * rabi2
    duration = 2.0 * math.pi / math.sqrt(rabi2 ** 2 + detuning ** 2)
    rabi1 = ratio * rabi2

    first = two_level_unitary(rabi1, detuning, 0.0, duration)

    def transfer(phase: float) -> float:
        U = two_level_unitary(rabi1, detuning, phase, duration) @ first
        return float(abs(U[0, 1]) ** 2)

    grid = np.linspace(0.0, 2.0 * math.pi, 73)
    best = int(np.argmax([transfer(p) for p in grid]))
    lo, hi = grid[max(best - 1, 0)], grid[min(best + 1, len(grid) - 1)]
    result = minimize_scalar(lambda p: -transfer(p), bounds=(lo, hi), method="bounded",
                             options={"xatol": 1e-12})
    phase = float(result.x) % (2.0 * math.pi)

    A1 = two_level_unitary(rabi2, detuning, 0.0, duration)
    A2 = two_level_unitary(rabi2, detuning, phase, duration)
    ret = float(abs((A2 @ A1)[0, 0]) ** 2)
    return TwoPulseSolution(detuning, duration, phase, transfer(phase), ret)
