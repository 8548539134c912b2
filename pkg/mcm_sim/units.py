"""Unit grammar for config values and CLI flags.

Quantities are written as ``<number> <unit>``, e.g. ``"10.2 G"``, ``"44.8 kHz"``,
``"165 ns"``. Cyclic frequency units are converted to angular frequency
(rad/s); everything else is converted to plain SI.
"""
from __future__ import annotations

import math
import re
from typing import Dict

from .errors import ConfigError

TWO_PI = 2.0 * math.pi

QUANTITY_REGEX = re.compile(
    r"^\s*(?P<value>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(?P<unit>(?:1/|/)?[^\s\d.+\-/][^\s]*)?\s*$"
)

# dimension -> unit -> factor to SI (angular units for frequencies)
UNITS: Dict[str, Dict[str, float]] = {
    "frequency": {
        "Hz": TWO_PI,
        "kHz": TWO_PI * 1e3,
        "MHz": TWO_PI * 1e6,
        "GHz": TWO_PI * 1e9,
        "rad/s": 1.0,
        "krad/s": 1e3,
        "Mrad/s": 1e6,
    },
    "rate": {
        "1/s": 1.0,
        "/s": 1.0,
        "1/ms": 1e3,
        "1/us": 1e6,
        "1/µs": 1e6,
        "1/ns": 1e9,
    },
    "time": {
        "s": 1.0,
        "ms": 1e-3,
        "us": 1e-6,
        "µs": 1e-6,
        "μs": 1e-6,
        "ns": 1e-9,
    },
    "temperature": {
        "K": 1.0,
        "mK": 1e-3,
        "uK": 1e-6,
        "µK": 1e-6,
        "μK": 1e-6,
        "nK": 1e-9,
    },
    "field": {
        "T": 1.0,
        "mT": 1e-3,
        "uT": 1e-6,
        "µT": 1e-6,
        "G": 1e-4,
        "mG": 1e-7,
    },
    "length": {
        "m": 1.0,
        "mm": 1e-3,
        "um": 1e-6,
        "µm": 1e-6,
        "μm": 1e-6,
        "nm": 1e-9,
    },
}


def parse_quantity(text: str, dimension: str) -> float:
    """Parse ``text`` as a quantity of ``dimension`` and return its SI value."""
    if dimension not in UNITS:
        raise ConfigError(f"unknown dimension '{dimension}'")
    if not isinstance(text, str):
        raise ConfigError(f"expected a {dimension} with unit suffix, got {text!r}")
    match = QUANTITY_REGEX.match(text)
    if match is None:
        raise ConfigError(f"cannot parse quantity {text!r}")
    unit = match.group("unit")
    if unit is None:
        raise ConfigError(
            f"{dimension} {text!r} needs a unit suffix ({', '.join(UNITS[dimension])})"
        )
    table = UNITS[dimension]
    if unit not in table:
        raise ConfigError(
            f"unit '{unit}' is not a {dimension} unit ({', '.join(table)})"
        )
    return float(match.group("value")) * table[unit]


def format_quantity(value: float, dimension: str, unit: str) -> str:
    """Inverse of :func:`parse_quantity` for a chosen unit."""
    factor = UNITS[dimension][unit]
    return f"{value / factor:.12g} {unit}"


def is_quantity(text: str, dimension: str) -> bool:
    try:
        parse_quantity(text, dimension)
    except ConfigError:
        return False
    return True
