"""Semi-classical 1-D Sisyphus cooling on the 685-nm quadrupole line.

An atom excited at x0 into the more tightly confined excited state climbs its
potential before decaying. ``delta_U`` is the energy change per cycle, the
excitation rate localizes cycles near the trap center through the differential
Stark shift, and ``mean_cooling_rate`` averages both over the thermal position
density. Energies are in joules, rates in 1/s; reports convert to uK/ms.
"""
from __future__ import annotations

import logging
import math
import warnings
from dataclasses import asdict, dataclass, replace
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.optimize import brentq

from . import constants as C
from .atomic_model import recoil_energy
from .errors import DomainError, QuadratureError

logger = logging.getLogger(__name__)

UK_PER_MS = 1e3          # (K/s) -> (uK/ms)
BOUND_SIGMAS = 5.0
QUAD_TOLERANCE = 1e-4    # absolute tolerance: fraction of integrand peak times interval


@dataclass(frozen=True)
class CoolingParams:
    """Cooling configuration; frequencies are angular, temperatures in kelvin."""

    gamma: float = C.GAMMA_5D_QUADRUPOLE
    omega_g: float = 0.32 * C.GAMMA_5D_QUADRUPOLE
    omega_e: float = 0.64 * C.GAMMA_5D_QUADRUPOLE
    mass: float = C.CS_MASS
    saturation: float = 0.2
    detuning: float = 0.0
    temperature: float = 10e-6
    trap_depth: float = 500e-6
    waist: float = 1e-6
    saturate: bool = True

    def __post_init__(self):
        if self.omega_e <= 0:
            raise DomainError(f"excited-state trap frequency must be > 0, got {self.omega_e}")
        if self.omega_g < 0:
            raise DomainError(f"ground-state trap frequency must be >= 0, got {self.omega_g}")
        if self.temperature <= 0:
            raise DomainError(f"temperature must be > 0, got {self.temperature}")
        if self.trap_depth <= 0:
            raise DomainError(f"trap depth must be > 0, got {self.trap_depth}")
        if self.gamma <= 0 or self.waist <= 0 or self.mass <= 0:
            raise DomainError("decay rate, waist and mass must be > 0")

    @classmethod
    def from_config(cls, config, omega_g_over_gamma: Optional[float] = None) -> "CoolingParams":
        block = config.cooling
        gamma = block.si("gamma")
        ratio = block.omega_g_over_gamma if omega_g_over_gamma is None else omega_g_over_gamma
        omega_g = ratio * gamma
        return cls(gamma=gamma, omega_g=omega_g, omega_e=block.omega_ratio * omega_g,
                   saturation=block.saturation, detuning=block.si("detuning"),
                   temperature=block.si("temperature"), trap_depth=block.si("trap_depth"),
                   waist=block.si("waist"), saturate=block.saturate)

    def at_ratio(self, omega_g_over_gamma: float) -> "CoolingParams":
        """Same trap-frequency ratio, ground trap frequency set to ``omega_g_over_gamma`` * gamma."""
        if self.omega_g == 0:
            raise DomainError("cannot rescale a scan from omega_g = 0")
        omega_g = omega_g_over_gamma * self.gamma
        return replace(self, omega_g=omega_g, omega_e=omega_g * self.omega_e / self.omega_g)

    @property
    def x_m(self) -> float:
        """Classical turning point sqrt(2 kB T / m omega_e^2)."""
        return math.sqrt(2.0 * C.KB * self.temperature / (self.mass * self.omega_e ** 2))

    @property
    def sigma(self) -> float:
        """Thermal position spread (w/2) sqrt(kB T / U_trap)."""
        return 0.5 * self.waist * math.sqrt(self.temperature / self.trap_depth)

    @property
    def stark_span(self) -> float:
        """Differential depth (U_e - U_g) / hbar; the excited depth scales as (omega_e/omega_g)^2."""
        if self.omega_g == 0:
            return 0.0
        ratio2 = (self.omega_e / self.omega_g) ** 2
        return C.KB * self.trap_depth * (ratio2 - 1.0) / C.HBAR

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _prefactor(p: CoolingParams) -> float:
    ratio2 = (p.omega_g / p.omega_e) ** 2
    return p.mass * p.omega_e ** 2 * (1.0 - ratio2) / (4.0 * (1.0 + p.gamma ** 2 / (4.0 * p.omega_e ** 2)))


def _delta_u(x, p: CoolingParams):
    return -_prefactor(p) * (p.x_m ** 2 - 2.0 * np.square(x))


def delta_U(x0: float, params: CoolingParams) -> float:
    """Mean energy change of one cycle excited at ``x0`` (J); negative means cooling."""
    if abs(x0) > params.x_m:
        raise DomainError(f"|x0| = {abs(x0):.4g} m exceeds the turning point x_m = {params.x_m:.4g} m")
    return float(_delta_u(x0, params))


def delta_U_trajectory(x0: float, params: CoolingParams) -> float:
    """Oracle: -(gamma m (omega_e^2 - omega_g^2) / 2) int [x(t)^2 - x0^2] e^(-gamma t) dt, averaged over x_+ and x_-."""
    p = params
    if abs(x0) > p.x_m:
        raise DomainError(f"|x0| exceeds the turning point x_m = {p.x_m:.4g} m")
    v = math.sqrt(max(p.x_m ** 2 - x0 ** 2, 0.0))
    horizon = 50.0 / p.gamma

    def branch(sign: float) -> float:
        def integrand(t):
            x = x0 * math.cos(p.omega_e * t) + sign * v * math.sin(p.omega_e * t)
            return (x * x - x0 * x0) * math.exp(-p.gamma * t)
        value, _ = quad(integrand, 0.0, horizon, limit=2000, epsabs=0.0, epsrel=1e-12)
        return value

    scale = 0.5 * p.gamma * p.mass * (p.omega_e ** 2 - p.omega_g ** 2)
    return -scale * 0.5 * (branch(1.0) + branch(-1.0))


def stark_detuning(x, params: CoolingParams):
    """Change of the laser detuning from the local resonance, Gaussian-beam profile."""
    return -params.stark_span * (1.0 - np.exp(-2.0 * np.square(x) / params.waist ** 2))


def excitation_rate(x, params: CoolingParams):
    """Lorentzian (gamma/2) s / (1 [+ s] + 4 [(Delta_0 + Delta(x)) / gamma]^2)."""
    p = params
    detuning = p.detuning + stark_detuning(x, p)
    floor = 1.0 + (p.saturation if p.saturate else 0.0)
    return 0.5 * p.gamma * p.saturation / (floor + 4.0 * np.square(detuning / p.gamma))


def rate_half_width(params: CoolingParams) -> float:
    """Position where the excitation rate falls to half its central value."""
    half = 0.5 * float(excitation_rate(0.0, params))
    far = 5.0 * params.waist
    if float(excitation_rate(far, params)) > half:
        raise DomainError("excitation rate never falls to half its central value")
    return brentq(lambda x: float(excitation_rate(x, params)) - half, 0.0, far, xtol=1e-18, rtol=1e-13)


def position_density(x, params: CoolingParams):
    """Normalized Gaussian density of width ``params.sigma``."""
    s = params.sigma
    return np.exp(-np.square(x) / (2.0 * s * s)) / (math.sqrt(2.0 * math.pi) * s)


def _integrate(fn, lo: float, hi: float, peak: float, what: str, tolerance: float) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("error", IntegrationWarning)
        try:
            value, error = quad(fn, lo, hi, epsabs=tolerance * abs(peak) * (hi - lo),
                                epsrel=1e-10, limit=500)
        except IntegrationWarning as e:
            raise QuadratureError(f"{what} did not converge: {e}",
                                  details={"interval": [lo, hi], "peak": peak}) from None
    logger.debug("%s = %.6g (abs error %.2g)", what, value, error)
    return value


def mean_cooling_rate(params: CoolingParams, units: str = "si", tolerance: float = QUAD_TOLERANCE) -> float:
    """Mean energy change per unit time in uK/ms, negative for net cooling.

    ``units="scaled"`` integrates in x / sigma with energies in uK and times in
    us; both paths give the same number.
    """
    p = params
    if units == "si":
        bound = BOUND_SIGMAS * p.sigma

        def integrand(x):
            return float(_delta_u(x, p) * excitation_rate(x, p) * position_density(x, p))

        peak = abs(integrand(0.0)) or 1.0
        joules_per_s = _integrate(integrand, -bound, bound, peak, "mean cooling rate", tolerance)
        return joules_per_s / C.KB * UK_PER_MS
    if units == "scaled":
        uk = C.KB * 1e-6
        s = p.sigma

        def integrand_u(u):
            x = u * s
            du = float(_delta_u(x, p)) / uk
            rate = float(excitation_rate(x, p)) * 1e-6
            return du * rate * math.exp(-0.5 * u * u) / math.sqrt(2.0 * math.pi)

        peak = abs(integrand_u(0.0)) or 1.0
        uk_per_us = _integrate(integrand_u, -BOUND_SIGMAS, BOUND_SIGMAS, peak, "mean cooling rate", tolerance)
        return uk_per_us * 1e3
    raise DomainError(f"unknown unit system '{units}' (si or scaled)")


def mean_scattering_rate(params: CoolingParams, tolerance: float = QUAD_TOLERANCE) -> float:
    """Position-averaged excitation rate of the cooling beams (1/s)."""
    bound = BOUND_SIGMAS * params.sigma

    def integrand(x):
        return float(excitation_rate(x, params) * position_density(x, params))

    return _integrate(integrand, -bound, bound, integrand(0.0), "mean scattering rate", tolerance)


def monte_carlo_cooling_rate(params: CoolingParams, samples: int = 1_000_000,
                             rng: Optional[np.random.Generator] = None) -> float:
    """Oracle: average of delta_U * r over x0 drawn from the position density (uK/ms)."""
    if samples < 1:
        raise DomainError("samples must be >= 1")
    rng = rng if rng is not None else np.random.default_rng(0)
    x = rng.normal(0.0, params.sigma, size=samples)
    x = x[np.abs(x) <= BOUND_SIGMAS * params.sigma]
    values = _delta_u(x, params) * excitation_rate(x, params)
    return float(values.sum() / samples) / C.KB * UK_PER_MS


def molasses_heating(r_mol: float, wavelength: float = C.D2_WAVELENGTH) -> float:
    """Recoil heating r_mol * 2 E_rec of a 1-D molasses, in uK/ms."""
    if r_mol < 0:
        raise DomainError(f"molasses scattering rate must be >= 0, got {r_mol}")
    return r_mol * 2.0 * recoil_energy(wavelength) / C.KB * UK_PER_MS


@dataclass(frozen=True)
class ScanPoint:
    omega_g_over_gamma: float
    scattering_rate: float
    energy_rate: float

    @property
    def cooling_rate(self) -> float:
        return -self.energy_rate


@dataclass
class CoolingScan:
    params: CoolingParams
    points: List[ScanPoint]
    heating: Dict[float, float]
    crossovers: Dict[float, List[float]]

    @property
    def best(self) -> ScanPoint:
        return max(self.points, key=lambda pt: pt.cooling_rate)

    def csv_rows(self) -> List[List[Any]]:
        header = ["omega_g_over_gamma", "scattering_rate_per_s", "cooling_rate_uK_per_ms"]
        header += [f"net_cooling_rmol_{r_mol:g}_uK_per_ms" for r_mol in self.heating]
        rows: List[List[Any]] = [header]
        for pt in self.points:
            rows.append([pt.omega_g_over_gamma, pt.scattering_rate, pt.cooling_rate]
                        + [pt.cooling_rate - h for h in self.heating.values()])
        return rows

    def to_document(self) -> Dict[str, Any]:
        best = self.best
        return {
            "params": self.params.to_dict(),
            "max_cooling_rate_uK_per_ms": best.cooling_rate,
            "max_at_omega_g_over_gamma": best.omega_g_over_gamma,
            "molasses_heating_uK_per_ms": {f"{k:g}": v for k, v in self.heating.items()},
            "crossovers": {f"{k:g}": v for k, v in self.crossovers.items()},
            "points": [{"omega_g_over_gamma": pt.omega_g_over_gamma,
                        "scattering_rate": pt.scattering_rate,
                        "cooling_rate": pt.cooling_rate} for pt in self.points],
        }


def scan(params: CoolingParams, ratios: Sequence[float],
         molasses_rates: Sequence[float] = ()) -> CoolingScan:
    """Cooling and scattering rate across omega_g/gamma, plus molasses crossovers.

    A crossover is a ratio where the cooling rate equals the recoil heating
    r_mol * 2 E_rec; each sign change on the grid is refined with brentq.
    """
    ratios = [float(r) for r in ratios]
    if not ratios or any(r <= 0 for r in ratios):
        raise DomainError("scan range must contain positive omega_g/gamma values")
    points = []
    for ratio in ratios:
        at = params.at_ratio(ratio)
        points.append(ScanPoint(ratio, mean_scattering_rate(at), mean_cooling_rate(at)))
    heating = {float(r): molasses_heating(r) for r in molasses_rates}
    crossovers: Dict[float, List[float]] = {}
    for r_mol, h in heating.items():
        roots = []

        def net(ratio: float, h=h) -> float:
            return -mean_cooling_rate(params.at_ratio(ratio)) - h

        for a, b in zip(points, points[1:]):
            fa, fb = a.cooling_rate - h, b.cooling_rate - h
            if fa == 0.0:
                roots.append(a.omega_g_over_gamma)
            elif fa * fb < 0:
                roots.append(brentq(net, a.omega_g_over_gamma, b.omega_g_over_gamma, xtol=1e-9))
        crossovers[r_mol] = roots
        if not roots:
            logger.info("cooling never crosses molasses heating %.3g uK/ms (r_mol=%g)", h, r_mol)
    return CoolingScan(params, points, heating, crossovers)


def scan_grid(start: float, stop: float, points: int) -> np.ndarray:
    """Log-spaced omega_g/gamma grid."""
    if start <= 0 or stop <= 0:
        raise DomainError("scan range must be positive")
    if points == 1:
        return np.array([float(start)])
    return np.geomspace(start, stop, points)
