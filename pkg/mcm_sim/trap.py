"""Crossed-deflector tweezer array: tone powers, site depths and ramps.

A site depth is kappa * P_row * P_col. Tone powers are in units of the
initial (uniform) tone power, so kappa is the initial site depth.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .errors import DomainError

DEFAULT_RAMP = 200e-6


def blackman_ramp(u: float) -> float:
    """Normalized integral of a Blackman window; 0 -> 0, 1 -> 1, monotone."""
    u = min(max(u, 0.0), 1.0)
    value = (0.42 * u
             - 0.5 * math.sin(2.0 * math.pi * u) / (2.0 * math.pi)
             + 0.08 * math.sin(4.0 * math.pi * u) / (4.0 * math.pi))
    return value / 0.42


@dataclass(frozen=True)
class TrapPlan:
    n: int
    kappa: float                      # initial site depth (K)
    row_start: Tuple[float, ...]
    row_end: Tuple[float, ...]
    col_start: Tuple[float, ...]
    col_end: Tuple[float, ...]
    duration: float = DEFAULT_RAMP
    ancilla_sites: Tuple[int, ...] = ()
    data_sites: Tuple[int, ...] = ()
    boost: float = 1.0                # total input power end / start per axis

    def __post_init__(self):
        for tones in (self.row_start, self.row_end, self.col_start, self.col_end):
            if len(tones) != self.n:
                raise DomainError(f"expected {self.n} tones, got {len(tones)}")
            if any(p <= 0 for p in tones):
                raise DomainError("tone powers must be > 0")
        if self.duration <= 0:
            raise DomainError("ramp duration must be > 0")

    def site(self, row: int, col: int) -> int:
        return row * self.n + col

    def coords(self, site: int) -> Tuple[int, int]:
        return divmod(site, self.n)

    @property
    def corner_sites(self) -> Tuple[int, ...]:
        last = self.n - 1
        return (self.site(0, 0), self.site(0, last), self.site(last, 0), self.site(last, last))

    def tone_powers(self, progress: float) -> Tuple[np.ndarray, np.ndarray]:
        """Row and column powers at ramp progress B in [0, 1] (geometric interpolation)."""
        rows = np.asarray(self.row_start) ** (1.0 - progress) * np.asarray(self.row_end) ** progress
        cols = np.asarray(self.col_start) ** (1.0 - progress) * np.asarray(self.col_end) ** progress
        return rows, cols

    def depths_at(self, progress: float) -> np.ndarray:
        rows, cols = self.tone_powers(progress)
        return self.kappa * np.outer(rows, cols)

    @property
    def start_depths(self) -> np.ndarray:
        return self.depths_at(0.0)

    @property
    def end_depths(self) -> np.ndarray:
        return self.depths_at(1.0)

    def site_depth(self, site: int, progress: float) -> float:
        row, col = self.coords(site)
        return float(self.depths_at(progress)[row, col])

    def summary(self) -> Dict[str, object]:
        start, end = self.start_depths, self.end_depths
        return {
            "n": self.n,
            "ramp_s": self.duration,
            "boost": self.boost,
            "ancilla_sites": list(self.ancilla_sites),
            "data_sites": list(self.data_sites),
            "start_depth_K": start.round(12).tolist(),
            "end_depth_K": end.round(12).tolist(),
        }


def trap_ramp(plan: TrapPlan, t: float, direction: str = "up") -> np.ndarray:
    """Per-site depths (n x n, kelvin) at time ``t`` into the ramp."""
    if not 0.0 <= t <= plan.duration:
        raise DomainError(f"t={t:g} s outside the ramp [0, {plan.duration:g}] s")
    u = t / plan.duration
    if direction == "down":
        u = 1.0 - u
    elif direction != "up":
        raise DomainError(f"unknown ramp direction '{direction}'")
    return plan.depths_at(blackman_ramp(u))


def default_trap_plan(depth_start: float = 0.85e-3, depth_ancilla: float = 1.8e-3,
                      duration: float = DEFAULT_RAMP) -> TrapPlan:
    """3x3 array with the central site raised; its four neighbours hold their depth."""
    return scale_trap_plan(3, depth_start, depth_ancilla, hold="neighbors", duration=duration)


def scale_trap_plan(n: int, depth_start: float = 0.85e-3, depth_ancilla: float = 1.8e-3,
                    hold: str = "neighbors", duration: float = DEFAULT_RAMP) -> TrapPlan:
    """Interleaved P+/P- tone assignment for an odd n x n array.

    Odd tone indices become P+ orders. ``hold="neighbors"`` lowers the P- orders
    so that P+ P- equals the initial product (the small-array scheme, data on
    mixed sites); ``hold="minus"`` keeps P- fixed and boosts the input power
    (the large-array scheme, data on (-,-) sites).
    """
    if n < 3 or n % 2 == 0:
        raise DomainError(f"array size must be odd and >= 3, got {n}")
    if depth_start <= 0 or depth_ancilla <= 0:
        raise DomainError("depths must be > 0")
    ratio = math.sqrt(depth_ancilla / depth_start)
    if hold == "neighbors":
        p_plus, p_minus = ratio, 1.0 / ratio
    elif hold == "minus":
        p_plus, p_minus = ratio, 1.0
    else:
        raise DomainError(f"unknown hold scheme '{hold}'")
    plus = [i % 2 == 1 for i in range(n)]
    end = tuple(p_plus if is_plus else p_minus for is_plus in plus)
    start = tuple(1.0 for _ in range(n))
    n_plus = sum(plus)
    boost = (n_plus * p_plus + (n - n_plus) * p_minus) / n

    ancilla: List[int] = []
    data: List[int] = []
    for row in range(n):
        for col in range(n):
            site = row * n + col
            if plus[row] and plus[col]:
                ancilla.append(site)
            elif hold == "neighbors" and plus[row] != plus[col]:
                data.append(site)
            elif hold == "minus" and not plus[row] and not plus[col]:
                data.append(site)
    return TrapPlan(n, depth_start, start, end, start, end, duration,
                    tuple(ancilla), tuple(data), boost)
