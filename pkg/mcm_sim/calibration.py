"""Calibrated constants derived from a RunConfig by root finding.

Each solve is cached per configuration (keyed by its canonical JSON), so a
run pays for a calibration once.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass
from functools import lru_cache
from typing import Dict, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .atomic_model import LevelState
from .config import RunConfig, parse_config
from .errors import SolverError
from .pulse_engine import (
    AtomState,
    NoiseDeviate,
    NoiseModel,
    Propagator,
    PulseOp,
    composite_transfer,
    corpse,
    gauss_hermite,
)

logger = logging.getLogger(__name__)

SHELVED_PAIR = (LevelState(3, 0), LevelState(3, -1))
ZEEMAN_NODES = 5
T2_NODES = 24


def _key(config: RunConfig) -> str:
    return config.to_json()


def _config(key: str) -> RunConfig:
    return parse_config(json.loads(key))


# --- ancilla trap shift ------------------------------------------------------

def clock_corpse_error(config: RunConfig, detuning: float) -> float:
    from .sequence import CLOCK

    ops = corpse(CLOCK, config.rabi(*CLOCK))
    return 1.0 - composite_transfer(ops, detuning)


@lru_cache(maxsize=32)
def _trap_shift(key: str) -> float:
    config = _config(key)
    target = config.noise.ancilla_clock_error
    if target == 0:
        return 0.0
    from .sequence import CLOCK

    rabi = config.rabi(*CLOCK)
    residual = lambda d: clock_corpse_error(config, d) - target  # noqa: E731
    if residual(rabi) <= 0:
        raise SolverError(f"clock CORPSE error {target:g} not reached within |delta| <= Omega")
    delta = brentq(residual, 0.0, rabi, xtol=1e-9 * rabi)
    logger.info("ancilla trap shift %.6g rad/s gives clock CORPSE error %.4g", -delta, target)
    return -delta


def ancilla_trap_shift(config: RunConfig) -> float:
    """Extra f=4 shift of the deep ancilla trap (rad/s, negative)."""
    explicit = config.noise.si("ancilla_trap_shift")
    if explicit is not None:
        return explicit
    return _trap_shift(_key(config))


# --- Zeeman deviate width ----------------------------------------------------

def shelved_coherence(env, sigma: float, t: float, nodes: int = T2_NODES,
                      echo: Optional[Sequence[PulseOp]] = None) -> float:
    """Ramsey contrast of the |3,0>, |3,-1> pair after free evolution ``t``.

    ``echo`` pulses, if given, run at mid-dwell on top of the free time.
    """
    xs, ws = gauss_hermite(nodes)
    start = AtomState.superposition({SHELVED_PAIR[0]: 1.0, SHELVED_PAIR[1]: 1.0})
    rho01 = 0j
    for x, w in zip(xs, ws):
        prop = Propagator(env, NoiseDeviate(zeeman=sigma * x))
        if echo:
            state = prop.idle(start, 0.5 * t)
            clock = 0.5 * t
            for op in echo:
                state = prop.pulse(state, op, clock)
                clock += op.duration
            state = prop.idle(state, 0.5 * t)
        else:
            state = prop.idle(start, t)
        a = state.amp[SHELVED_PAIR[0].index]
        b = state.amp[SHELVED_PAIR[1].index]
        rho01 += w * a * np.conj(b)
    return float(2.0 * abs(rho01))


@lru_cache(maxsize=32)
def _zeeman_sigma(key: str) -> float:
    config = _config(key)
    env = config.environment()
    t2 = config.noise.si("t2_star")
    guess = 4.0 * math.sqrt(2.0) / t2
    target = math.exp(-1.0)
    sigma = brentq(lambda s: shelved_coherence(env, s, t2) - target, 0.0, 4.0 * guess,
                   xtol=1e-9 * guess)
    logger.info("Zeeman deviate width %.6g rad/s reproduces T2* = %.4g s", sigma, t2)
    return sigma


def zeeman_sigma(config: RunConfig) -> float:
    explicit = config.noise.si("sigma_zeeman")
    if explicit is not None:
        return explicit
    return _zeeman_sigma(_key(config))


def simulated_t2_star(env, sigma: float, t_max: float = 50e-3) -> float:
    """1/e time of the shelved-pair contrast for a given deviate width."""
    if sigma == 0:
        return math.inf
    return brentq(lambda t: shelved_coherence(env, sigma, t) - math.exp(-1.0), 0.0, t_max)


# --- amplitude deviate width -------------------------------------------------

def data_coherence(config: RunConfig, sigma_zeeman: float, sigma_amplitude: float,
                   ir=None) -> float:
    """Coherence of an equal data superposition through the measurement section."""
    from .executor import averaged_coherence
    from .sequence import build_mcm_sequence

    if ir is None:
        ir = build_mcm_sequence(config, "0", output=None, compensation=0.0)
    zx, zw = gauss_hermite(ZEEMAN_NODES)
    if sigma_amplitude > 0:
        ax, aw = gauss_hermite(config.noise.quadrature_nodes)
    else:
        ax, aw = np.zeros(1), np.ones(1)
    deviates, weights = [], []
    for z, wz in zip(zx, zw):
        for a, wa in zip(ax, aw):
            deviates.append(NoiseDeviate(sigma_zeeman * z, sigma_amplitude * a))
            weights.append(wz * wa)
    return averaged_coherence(ir, config.environment(), ir.data_sites[0], "mcm",
                              deviates, weights, config.calibration.window)


@lru_cache(maxsize=32)
def _amplitude_sigma(key: str) -> float:
    from .sequence import build_mcm_sequence

    config = _config(key)
    target = config.noise.data_coherence
    if target >= 1.0:
        return 0.0
    sz = zeeman_sigma(config)
    ir = build_mcm_sequence(config, "0", output=None, compensation=0.0)
    base = data_coherence(config, sz, 0.0, ir)
    if base <= target:
        logger.warning("data coherence %.4f without amplitude noise is already below %.4f; "
                       "amplitude deviate set to 0", base, target)
        return 0.0
    high = 0.01
    while data_coherence(config, sz, high, ir) > target:
        high *= 2.0
        if high > 0.5:
            raise SolverError(f"data coherence {target:g} not reached for amplitude width <= 0.5")
    sigma = brentq(lambda s: data_coherence(config, sz, s, ir) - target, 0.0, high, xtol=1e-5)
    logger.info("amplitude deviate width %.5f gives data coherence %.4f", sigma, target)
    return sigma


def amplitude_sigma(config: RunConfig) -> float:
    explicit = config.noise.sigma_amplitude
    if explicit is not None:
        return explicit
    return _amplitude_sigma(_key(config))


# --- bundle ------------------------------------------------------------------

@dataclass(frozen=True)
class Calibration:
    sigma_zeeman: float
    sigma_amplitude: float
    trap_shift: float
    compensation: float

    def to_dict(self) -> Dict[str, float]:
        return asdict(self)


def calibrate(config: RunConfig, noise: bool = True) -> Calibration:
    """All calibrated constants of a run; ``noise=False`` skips the noise widths."""
    return Calibration(
        zeeman_sigma(config) if noise else 0.0,
        amplitude_sigma(config) if noise else 0.0,
        ancilla_trap_shift(config),
        _compensation(_key(config)),
    )


@lru_cache(maxsize=32)
def _compensation(key: str) -> float:
    from .sequence import compensation_phase

    return compensation_phase(_config(key))


def noise_model(config: RunConfig, calibration: Optional[Calibration] = None,
                seed: Optional[int] = None) -> NoiseModel:
    cal = calibration or calibrate(config)
    return NoiseModel(cal.sigma_zeeman, cal.sigma_amplitude,
                      config.execution.seed if seed is None else seed)
