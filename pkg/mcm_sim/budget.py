"""Analytic error budget of the site-selective shift-out and of shelved-qubit readout.

Rates are in 1/s, frequencies in rad/s. Every result carries a regime report
telling whether the large-detuning forms are trustworthy at the given
parameters.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Optional

from scipy.optimize import minimize_scalar

from . import constants as C
from .atomic_model import ScatterParams, scattering_rate_bright, scattering_rate_offresonant
from .errors import DomainError

logger = logging.getLogger(__name__)

# scattering branching weights per ancilla basis state
BRANCHING_DARK = 11.0 / 24.0
BRANCHING_BRIGHT = 5.0 / 24.0
ROTATION_ERROR_COEFF = 5.0 / 16.0

LARGE_DETUNING_RATIO = 10.0   # |Delta| / omega_q above which the asymptotic forms apply
LONG_PULSE_PRODUCT = 10.0     # t * gamma above which the rate picture applies


@dataclass(frozen=True)
class BudgetParams:
    gamma: float = 1.0 / C.TAU_7P
    omega_q: float = C.OMEGA_HF
    omega_459: float = 0.0
    detuning: float = -2.0 * math.pi * 24e9
    omega_mu: float = 2.0 * math.pi * 44.8e3

    def __post_init__(self):
        if self.gamma <= 0:
            raise DomainError(f"decay rate must be > 0, got {self.gamma}")
        if self.omega_q <= 0:
            raise DomainError(f"qubit frequency must be > 0, got {self.omega_q}")
        if self.omega_mu <= 0:
            raise DomainError(f"microwave Rabi frequency must be > 0, got {self.omega_mu}")
        if self.omega_459 < 0:
            raise DomainError(f"shift-out Rabi frequency must be >= 0, got {self.omega_459}")

    @property
    def pulse_time(self) -> float:
        """Duration of a microwave pi pulse, pi / Omega_mu."""
        return math.pi / self.omega_mu

    @property
    def epsilon(self) -> float:
        """|Omega_mu / Delta_DLS| with the exact differential shift."""
        dls = abs(light_shifts(self).dls)
        return math.inf if dls == 0 else self.omega_mu / dls

    @classmethod
    def from_epsilon(cls, epsilon: float, **kwargs) -> "BudgetParams":
        """Choose Omega_459 so that the exact |Delta_DLS| equals Omega_mu / epsilon."""
        if epsilon <= 0:
            raise DomainError(f"epsilon must be > 0, got {epsilon}")
        unit = cls(omega_459=1.0, **kwargs)
        per_intensity = abs(light_shifts(unit).dls)
        omega_459 = math.sqrt(unit.omega_mu / epsilon / per_intensity)
        return cls(omega_459=omega_459, **kwargs)


def regime(params: BudgetParams) -> Dict[str, Any]:
    ratio = abs(params.detuning) / params.omega_q
    t_gamma = params.pulse_time * params.gamma
    report = {
        "detuning_over_omega_q": ratio,
        "large_detuning": ratio >= LARGE_DETUNING_RATIO,
        "t_gamma": t_gamma,
        "long_pulse": t_gamma >= LONG_PULSE_PRODUCT,
    }
    if not report["large_detuning"]:
        logger.info("large-detuning forms are marginal: |Delta|/omega_q = %.3g", ratio)
    if not report["long_pulse"]:
        logger.warning("t * gamma = %.3g is not >> 1; scattering rate picture is marginal", t_gamma)
    return report


@dataclass(frozen=True)
class LightShifts:
    delta4: float
    delta3: float
    dls: float
    dls_large_detuning: float
    regime: Dict[str, Any] = field(default_factory=dict)

    @property
    def exact_over_large(self) -> float:
        if self.dls_large_detuning == 0:
            return 1.0
        return abs(self.dls) / abs(self.dls_large_detuning)


def light_shifts(params: BudgetParams) -> LightShifts:
    """Per-manifold shifts Omega^2 / 4 Delta_f and the differential shift Delta_4 - Delta_3."""
    d4 = params.detuning
    d3 = params.detuning - params.omega_q
    if d4 == 0 or d3 == 0:
        raise DomainError(
            f"shift-out detuning {params.detuning:.6g} rad/s sits on a resonance pole"
        )
    intensity = params.omega_459 ** 2
    delta4 = intensity / (4.0 * d4)
    delta3 = intensity / (4.0 * d3)
    large = params.omega_q * intensity / (4.0 * d4 ** 2)
    return LightShifts(delta4, delta3, delta4 - delta3, large)


@dataclass(frozen=True)
class ScatterEstimate:
    exact: float
    large_detuning: float
    from_dls: float
    regime: Dict[str, Any]


def p_scat(params: BudgetParams) -> ScatterEstimate:
    """Scattering probability during a pi-duration shift-out pulse, averaged over |0>, |1>."""
    t = params.pulse_time
    intensity = params.omega_459 ** 2
    d4 = params.detuning
    d3 = params.detuning - params.omega_q
    if d4 == 0 or d3 == 0:
        raise DomainError("shift-out detuning sits on a resonance pole")
    exact = 0.5 * params.gamma * t * (intensity / (4.0 * d4 ** 2) + intensity / (4.0 * d3 ** 2))
    large = math.pi * params.gamma / (4.0 * params.omega_mu) * intensity / d4 ** 2
    dls_large = light_shifts(params).dls_large_detuning
    from_dls = math.pi * params.gamma * dls_large / (params.omega_q * params.omega_mu)
    return ScatterEstimate(exact, large, from_dls, regime(params))


@dataclass(frozen=True)
class PopulationErrors:
    epsilon: float
    c0: float
    c1: float
    c0_leading: Optional[float]
    c1_leading: Optional[float]

    @property
    def average(self) -> float:
        return 0.5 * (self.c0 + self.c1)


def population_errors_exact(epsilon: float) -> tuple:
    """Population lost from |4,0> (c0) and |3,0> (c1) under the shifted-out shelving pulse."""
    if epsilon <= 0:
        raise DomainError(f"epsilon must be > 0, got {epsilon}")
    e2 = epsilon * epsilon
    c0 = e2 / (e2 + 4.0) * math.sin(math.pi * math.sqrt(1.0 + 4.0 / e2)) ** 2
    c1 = e2 / (1.0 + e2) * math.sin(0.5 * math.pi * math.sqrt(1.0 + 1.0 / e2)) ** 2
    return c0, c1


def population_errors(epsilon: float, leading: bool = True) -> PopulationErrors:
    """Exact detuned-rotation errors plus their leading order in epsilon.

    With sqrt(1 + 1/eps^2) = 1/eps + eps/2 + O(eps^3) the c1 phase comes out as
    pi/eps + pi eps/2, and the c0 phase as 4 pi/eps + pi eps/2. Both leading
    forms differ from the exact ones by at most eps^2 relative to their envelopes.
    """
    c0, c1 = population_errors_exact(epsilon)
    lead0 = lead1 = None
    if leading:
        if epsilon >= 1.0:
            raise DomainError(f"leading-order expansion needs epsilon < 1, got {epsilon}")
        e2 = epsilon * epsilon
        lead0 = e2 / 8.0 * (1.0 - math.cos(4.0 * math.pi / epsilon + math.pi * epsilon / 2.0))
        lead1 = e2 / 2.0 * (1.0 - math.cos(math.pi / epsilon + math.pi * epsilon / 2.0))
    return PopulationErrors(epsilon, c0, c1, lead0, lead1)


def rotation_error(epsilon: float) -> float:
    """Error averaged over basis states and oscillations, 5 eps^2 / 16."""
    return ROTATION_ERROR_COEFF * epsilon ** 2


def branching_weights() -> Dict[str, float]:
    """Scattering events that flip the ancilla outcome, per basis state and averaged.

    The average weights the dark and bright outcomes by the two basis states
    the ancilla can hold, (11/24 + 5/24) / 2 = 1/3.
    """
    return {
        "dark": BRANCHING_DARK,
        "bright": BRANCHING_BRIGHT,
        "average": (BRANCHING_DARK + BRANCHING_BRIGHT) / 2.0,
    }


def total_error(epsilon: float, gamma: float, omega_q: float) -> float:
    """p(eps) = (pi/3) gamma / (omega_q eps) + (5/16) eps^2."""
    if epsilon <= 0:
        raise DomainError(f"epsilon must be > 0, got {epsilon}")
    return math.pi / 3.0 * gamma / (omega_q * epsilon) + rotation_error(epsilon)


def epsilon_opt(gamma: float, omega_q: float) -> float:
    """Stationary point of :func:`total_error`.

    dp/deps = -(pi/3) gamma / (omega_q eps^2) + (5/8) eps = 0 gives
    eps^3 = 8 pi gamma / (15 omega_q). The 8 pi comes from the pi/3 scattering
    coefficient, not 2 pi.
    At the optimum p = 15 eps^2 / 16.
    """
    return (8.0 * math.pi * gamma / (15.0 * omega_q)) ** (1.0 / 3.0)


def p_min(gamma: float, omega_q: float) -> float:
    return (15.0 * math.pi ** 2 / 64.0 * gamma ** 2 / omega_q ** 2) ** (1.0 / 3.0)


@dataclass(frozen=True)
class Optimum:
    gamma: float
    omega_q: float
    epsilon: float
    p_min: float
    epsilon_numeric: float
    p_min_numeric: float

    @property
    def relative_gap(self) -> float:
        return abs(self.epsilon_numeric - self.epsilon) / self.epsilon


def optimize_total_error(gamma: float, omega_q: float = C.OMEGA_HF) -> Optimum:
    if gamma <= 0 or omega_q <= 0:
        raise DomainError("gamma and omega_q must be > 0")
    eps = epsilon_opt(gamma, omega_q)
    # bounded search on a bracket well inside the convex region
    result = minimize_scalar(total_error, bounds=(eps / 20.0, min(20.0 * eps, 1.0)),
                             args=(gamma, omega_q), method="bounded",
                             options={"xatol": eps * 1e-10, "maxiter": 500})
    numeric = float(result.x)
    logger.debug("epsilon_opt %.9g (closed) vs %.9g (numeric)", eps, numeric)
    return Optimum(gamma, omega_q, eps, p_min(gamma, omega_q), numeric,
                   total_error(numeric, gamma, omega_q))


@dataclass(frozen=True)
class ShelvedCost:
    duration: float
    photons: float
    photoelectrons: float
    error: float
    bright_rate: float
    shelved_rate: float
    efficiency: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def shelved_cost(scatter: ScatterParams, efficiency: float, duration: Optional[float] = None,
                 target_photoelectrons: Optional[float] = None, branching: float = 1.0,
                 exact: bool = False) -> ShelvedCost:
    """Photon budget of a readout window and the scattering error it costs a shelved data qubit.

    Give either ``duration`` or ``target_photoelectrons``; the other is derived.
    """
    if (duration is None) == (target_photoelectrons is None):
        raise DomainError("give exactly one of duration or target_photoelectrons")
    if not 0.0 <= efficiency <= 1.0:
        raise DomainError(f"collection efficiency must be in [0, 1], got {efficiency}")
    bright = scattering_rate_bright(scatter)
    shelved = scattering_rate_offresonant(scatter)
    if duration is None:
        if target_photoelectrons < 0:
            raise DomainError("photoelectron target must be >= 0")
        if efficiency == 0 or bright == 0:
            raise DomainError("target unreachable with zero efficiency or zero scattering")
        duration = target_photoelectrons / (efficiency * bright)
    if duration < 0:
        raise DomainError(f"duration must be >= 0, got {duration}")
    photons = bright * duration
    x = shelved * duration
    error = -math.expm1(-x) if exact else x
    return ShelvedCost(duration, photons, efficiency * photons, branching * error,
                       bright, shelved, efficiency)


def shiftout_settings(epsilon: Optional[float], omega_mu: float, lifetime: float = C.TAU_7P,
                      detuning: float = -2.0 * math.pi * 24e9,
                      omega_q: float = C.OMEGA_HF) -> Dict[str, float]:
    """Level shifts and scattering probability of the shelving shift-out pulse.

    ``epsilon`` defaults to the optimum for the given lifetime.
    """
    gamma = 1.0 / lifetime
    eps = epsilon_opt(gamma, omega_q) if epsilon is None else epsilon
    params = BudgetParams.from_epsilon(eps, gamma=gamma, omega_q=omega_q,
                                       detuning=detuning, omega_mu=omega_mu)
    shifts = light_shifts(params)
    scatter = p_scat(params)
    return {
        "epsilon": eps,
        "omega_459": params.omega_459,
        "shift_f4": shifts.delta4,
        "shift_f3": shifts.delta3,
        "dls": shifts.dls,
        "p_scat": scatter.exact,
    }
