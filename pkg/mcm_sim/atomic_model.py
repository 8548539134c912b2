"""Static physics of the Cs 6s1/2 ground manifold.

Levels are the 16 hyperfine-Zeeman states |f, m_f> with f in {3, 4}.
Energies are angular frequencies (rad/s) relative to the hyperfine centroid,
so that at zero field E(3, m) = -omega_q/2 and E(4, m) = +omega_q/2.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, Iterator, Mapping, Sequence, Tuple

from sympy import Rational
from sympy.physics.wigner import clebsch_gordan

from . import constants as C
from .errors import DomainError

LEVEL_REGEX = re.compile(r"^\s*\(?\s*(?P<f>[34])\s*,\s*(?P<m>[-+]?\d)\s*\)?\s*$")
_LEVEL = r"\(?\s*[34]\s*,\s*[-+]?\d+\s*\)?"
TRANSITION_REGEX = re.compile(rf"^\s*(?P<a>{_LEVEL})\s*(?:->|<->|<-)\s*(?P<b>{_LEVEL})\s*$")

# polarization triple component order
SIGMA_MINUS, PI, SIGMA_PLUS = 0, 1, 2
POLARIZATION_NAMES = ("sigma-", "pi", "sigma+")


@dataclass(frozen=True, order=True)
class LevelState:
    f: int
    m: int

    def __post_init__(self):
        if self.f not in (3, 4):
            raise DomainError(f"hyperfine level f={self.f} is not in {{3, 4}}")
        if abs(self.m) > self.f:
            raise DomainError(f"|m_f|={abs(self.m)} exceeds f={self.f}")

    @property
    def index(self) -> int:
        return level_index(self.f, self.m)

    @classmethod
    def from_index(cls, index: int) -> "LevelState":
        if not 0 <= index < N_LEVELS:
            raise DomainError(f"level index {index} out of range")
        return LEVELS[index]

    @classmethod
    def parse(cls, text: str) -> "LevelState":
        match = LEVEL_REGEX.match(str(text))
        if match is None:
            raise DomainError(f"cannot parse level {text!r}; expected 'f,m'")
        return cls(int(match.group("f")), int(match.group("m")))

    def __str__(self) -> str:
        return f"{self.f},{self.m}"


def level_index(f: int, m: int) -> int:
    """f=3 occupies indices 0..6 (m=-3..3), f=4 occupies 7..15 (m=-4..4)."""
    if f == 3 and abs(m) <= 3:
        return m + 3
    if f == 4 and abs(m) <= 4:
        return 7 + m + 4
    raise DomainError(f"no level |{f},{m}>")


LEVELS: Tuple[LevelState, ...] = tuple(
    [LevelState(3, m) for m in range(-3, 4)] + [LevelState(4, m) for m in range(-4, 5)]
)
N_LEVELS = len(LEVELS)
F3_INDICES = tuple(range(0, 7))
F4_INDICES = tuple(range(7, 16))

QUBIT_0 = LevelState(*C.QUBIT_ZERO)
QUBIT_1 = LevelState(*C.QUBIT_ONE)
STRETCHED = LevelState(4, 4)


def iter_levels(f: int | None = None) -> Iterator[LevelState]:
    for level in LEVELS:
        if f is None or level.f == f:
            yield level


def parse_transition(text: str) -> Tuple[LevelState, LevelState]:
    """Parse calibration keys such as ``"4,4->3,3"``."""
    match = TRANSITION_REGEX.match(str(text))
    if match is None:
        raise DomainError(f"cannot parse transition {text!r}; expected 'f,m->f,m'")
    a = LevelState.parse(match.group("a"))
    b = LevelState.parse(match.group("b"))
    if a.f == b.f:
        raise DomainError(f"transition {text!r} stays inside f={a.f}")
    return a, b


def split_pair(a: LevelState, b: LevelState) -> Tuple[LevelState, LevelState]:
    """Return (lower, upper) = (f=3 level, f=4 level)."""
    if a.f == b.f:
        raise DomainError(f"|{a}> and |{b}> are in the same hyperfine manifold")
    return (a, b) if a.f == 3 else (b, a)


@dataclass(frozen=True)
class FieldEnvironment:
    B: float = 1.02e-3
    omega_q: float = C.OMEGA_HF
    g3: float = -0.25
    g4: float = 0.25
    breit_rabi: bool = False
    g_j: float = 2.0
    g_i: float = 0.0

    def __post_init__(self):
        if self.B < 0:
            raise DomainError(f"bias field must be >= 0, got {self.B}")
        if self.omega_q <= 0:
            raise DomainError(f"hyperfine splitting must be > 0, got {self.omega_q}")

    @property
    def zeeman_unit(self) -> float:
        """mu_B B / hbar in rad/s."""
        return C.MU_B * self.B / C.HBAR

    def g_f(self, f: int) -> float:
        return self.g3 if f == 3 else self.g4

    def with_field(self, B: float) -> "FieldEnvironment":
        return FieldEnvironment(B, self.omega_q, self.g3, self.g4, self.breit_rabi, self.g_j, self.g_i)


def zeeman_energy(s: LevelState, env: FieldEnvironment) -> float:
    """Level energy relative to the hyperfine centroid (rad/s)."""
    sign = 1.0 if s.f == 4 else -1.0
    if not env.breit_rabi:
        return sign * env.omega_q / 2.0 + env.g_f(s.f) * s.m * env.zeeman_unit
    # Breit-Rabi for I = 7/2; constant -omega_q/16 offset dropped so B -> 0 gives +-omega_q/2
    x = (env.g_j - env.g_i) * env.zeeman_unit / env.omega_q
    two_i_plus_one = 2.0 * C.CS_NUCLEAR_SPIN + 1.0
    root = math.sqrt(1.0 + 4.0 * s.m * x / two_i_plus_one + x * x)
    if abs(s.m) == 4:
        # stretched states are the analytic continuation 1 +- x
        root = 1.0 + math.copysign(x, s.m)
    return env.g_i * s.m * env.zeeman_unit + sign * env.omega_q / 2.0 * root


def level_energies(env: FieldEnvironment) -> Tuple[float, ...]:
    return tuple(zeeman_energy(level, env) for level in LEVELS)


def transition_frequency(a: LevelState, b: LevelState, env: FieldEnvironment) -> float:
    """|E(b) - E(a)| for a cross-manifold pair."""
    lower, upper = split_pair(a, b)
    if not env.breit_rabi:
        # written as omega_q + (g4 m4 - g3 m3) u so that degenerate pairs agree bit for bit
        return abs(env.omega_q + (env.g4 * upper.m - env.g3 * lower.m) * env.zeeman_unit)
    return abs(zeeman_energy(upper, env) - zeeman_energy(lower, env))


@lru_cache(maxsize=None)
def clebsch_gordan_factor(m3: int, q: int, m4: int) -> float:
    """<3 m3; 1 q | 4 m4> from exact rational angular-momentum algebra."""
    value = clebsch_gordan(Rational(3), Rational(1), Rational(4), Rational(m3), Rational(q), Rational(m4))
    return float(value)


def mw_coupling(a: LevelState, b: LevelState, pol: Sequence[complex]) -> complex:
    """Relative magnetic-dipole amplitude of the pair for polarization (sigma-, pi, sigma+)."""
    lower, upper = split_pair(a, b)
    q = upper.m - lower.m
    if abs(q) > 1:
        return 0j
    component = complex(pol[q + 1])
    if component == 0:
        return 0j
    return clebsch_gordan_factor(lower.m, q, upper.m) * component


def pure_polarization(a: LevelState, b: LevelState) -> Tuple[complex, complex, complex]:
    """Unit polarization selecting the pair's Delta m_f."""
    lower, upper = split_pair(a, b)
    q = upper.m - lower.m
    if abs(q) > 1:
        raise DomainError(f"|{lower}> <-> |{upper}> violates |Delta m_f| <= 1")
    pol = [0j, 0j, 0j]
    pol[q + 1] = 1.0 + 0j
    return tuple(pol)


def cross_manifold_pairs() -> Iterator[Tuple[LevelState, LevelState]]:
    for lower in iter_levels(3):
        for upper in iter_levels(4):
            yield lower, upper


@dataclass(frozen=True)
class ScatterParams:
    """Near-resonant 852-nm readout light.

    ``saturation`` is I/I_sat of the cycling transition; ``detuning`` is measured
    from f=4 -> f'=5.
    """

    gamma: float = C.GAMMA_6P
    saturation: float = 3.0
    detuning: float = -2.0 * C.GAMMA_6P
    omega_q: float = C.OMEGA_HF
    excited_offsets: Mapping[int, float] = field(default_factory=lambda: dict(C.D2_EXCITED_OFFSETS))
    line_strengths: Mapping[int, float] = field(default_factory=lambda: dict(C.D2_F3_STRENGTHS))
    shelved_reduction: float = 0.91

    def __post_init__(self):
        if self.gamma <= 0:
            raise DomainError(f"decay rate must be > 0, got {self.gamma}")
        if self.saturation < 0:
            raise DomainError(f"intensity must be >= 0, got {self.saturation}")

    def saturation_per_line(self) -> Dict[int, float]:
        return {fp: self.saturation * w for fp, w in self.line_strengths.items()}


def scattering_rate_bright(p: ScatterParams) -> float:
    """Two-level cycling rate (gamma/2) s / (1 + s + 4 Delta^2/gamma^2)."""
    s = p.saturation
    if math.isinf(s):
        return p.gamma / 2.0
    return (p.gamma / 2.0) * s / (1.0 + s + 4.0 * p.detuning ** 2 / p.gamma ** 2)


def scattering_rate_offresonant(p: ScatterParams) -> float:
    """Scattering rate of an atom shelved in f=3 under the readout light.

    Sum over f' = 2, 3, 4 of Lorentzians detuned by (Delta + omega_q + Delta_f'),
    reduced by the shelved-qubit factor.
    """
    total = 0.0
    for fp, s_f in p.saturation_per_line().items():
        detuning = p.detuning + p.omega_q + p.excited_offsets[fp]
        total += (p.gamma / 2.0) * s_f / (1.0 + s_f + 4.0 * detuning ** 2 / p.gamma ** 2)
    return p.shelved_reduction * total


def quadrupole_cycling_ratio(
    saturation_6: float = 0.2,
    hf_offset_5: float = 2.0 * math.pi * 127.4e6,
    hf_offset_4: float = 2.0 * math.pi * 233.6e6,
    sat_ratio_5: float = 1.7,
    sat_ratio_4: float = 3.2,
    gamma: float = C.GAMMA_5D_QUADRUPOLE,
    detuning: float = 0.0,
) -> float:
    """r_nc / r_c for 685-nm cooling on f=4 -> 5d5/2 f'=6.

    Non-cycling excitation goes through f'=5 and f'=4, whose saturation
    intensities are ``sat_ratio_*`` times that of f'=6.
    """
    if gamma <= 0:
        raise DomainError("gamma must be > 0")

    def lorentz(s, d):
        return (gamma / 2.0) * s / (1.0 + 4.0 * d ** 2 / gamma ** 2 + s)

    r_c = lorentz(saturation_6, detuning)
    if r_c == 0:
        raise DomainError("cycling rate vanishes; intensity must be > 0")
    r_nc = 0.0
    for offset, ratio in ((hf_offset_5, sat_ratio_5), (hf_offset_4, sat_ratio_4)):
        if math.isinf(offset):
            continue
        r_nc += lorentz(saturation_6 / ratio, detuning + offset)
    return r_nc / r_c


def recoil_energy(wavelength: float = C.D2_WAVELENGTH, mass: float = C.CS_MASS) -> float:
    """Single-photon recoil energy hbar^2 k^2 / 2m in joules."""
    k = 2.0 * math.pi / wavelength
    return (C.HBAR * k) ** 2 / (2.0 * mass)
