import math

import pytest

from mcm_sim.errors import ConfigError
from mcm_sim.units import format_quantity, is_quantity, parse_quantity


@pytest.mark.parametrize("text, dim, expected", [
    ("10.2 G", "field", 1.02e-3),
    ("44.8 kHz", "frequency", 2 * math.pi * 44.8e3),
    ("9.192631770 GHz", "frequency", 2 * math.pi * 9.19263177e9),
    ("3 rad/s", "frequency", 3.0),
    ("165 ns", "time", 165e-9),
    ("4 ms", "time", 4e-3),
    ("1.8 mK", "temperature", 1.8e-3),
    ("1e4 1/s", "rate", 1e4),
    ("2 1/us", "rate", 2e6),
    ("1 um", "length", 1e-6),
    ("-24 GHz", "frequency", -2 * math.pi * 24e9),
])
def test_parse_quantity(text, dim, expected):
    assert parse_quantity(text, dim) == pytest.approx(expected, rel=1e-12)


def test_missing_unit_is_rejected():
    with pytest.raises(ConfigError, match="unit suffix"):
        parse_quantity("10.2", "field")


def test_wrong_dimension_is_rejected():
    with pytest.raises(ConfigError, match="not a time unit"):
        parse_quantity("10 kHz", "time")


def test_non_string_and_unknown_dimension():
    with pytest.raises(ConfigError):
        parse_quantity(10.2, "field")
    with pytest.raises(ConfigError, match="unknown dimension"):
        parse_quantity("1 s", "charge")


def test_format_quantity_inverts_parse():
    value = parse_quantity("62.8 kHz", "frequency")
    assert format_quantity(value, "frequency", "kHz") == "62.8 kHz"


def test_is_quantity():
    assert is_quantity("200 us", "time")
    assert not is_quantity("200", "time")
