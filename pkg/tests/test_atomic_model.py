import math

import pytest

from mcm_sim.atomic_model import (
    LEVELS,
    QUBIT_0,
    QUBIT_1,
    FieldEnvironment,
    LevelState,
    ScatterParams,
    clebsch_gordan_factor,
    cross_manifold_pairs,
    level_index,
    mw_coupling,
    parse_transition,
    pure_polarization,
    quadrupole_cycling_ratio,
    recoil_energy,
    scattering_rate_bright,
    scattering_rate_offresonant,
    split_pair,
    transition_frequency,
    zeeman_energy,
)
from mcm_sim.errors import DomainError


def test_level_indexing_is_a_bijection():
    assert len(LEVELS) == 16
    for i, level in enumerate(LEVELS):
        assert level.index == i
        assert LevelState.from_index(i) == level
    assert level_index(3, -3) == 0
    assert level_index(4, 4) == 15


@pytest.mark.parametrize("f, m", [(2, 0), (3, 4), (4, -5)])
def test_invalid_levels(f, m):
    with pytest.raises(DomainError):
        LevelState(f, m)


def test_parse_transition_and_split():
    a, b = parse_transition("4,4->3,3")
    assert (a, b) == (LevelState(4, 4), LevelState(3, 3))
    assert split_pair(a, b) == (LevelState(3, 3), LevelState(4, 4))
    assert str(LevelState.parse("(3,-1)")) == "3,-1"
    with pytest.raises(DomainError):
        parse_transition("3,0->3,1")


@pytest.mark.parametrize("text, expected", [
    ("3,-1->4,-1", (LevelState(3, -1), LevelState(4, -1))),
    ("4,0->3,-1", (LevelState(4, 0), LevelState(3, -1))),
    ("(4,-3)<->(3,-2)", (LevelState(4, -3), LevelState(3, -2))),
    (" 3, 0 <- 4, 1 ", (LevelState(3, 0), LevelState(4, 1))),
])
def test_parse_transition_with_negative_m(text, expected):
    assert parse_transition(text) == expected


@pytest.mark.parametrize("text", ["3,-1", "3,-1->", "3,-1->4,-1->3,0", "5,0->4,0"])
def test_parse_transition_rejects_malformed(text):
    with pytest.raises(DomainError):
        parse_transition(text)


def test_clock_transition_is_field_insensitive(env):
    assert transition_frequency(QUBIT_0, QUBIT_1, env) == pytest.approx(env.omega_q, rel=1e-15)


def test_linear_zeeman_shift(env):
    u = env.zeeman_unit
    expected = env.omega_q + (0.25 * 4 + 0.25 * 3) * u
    assert transition_frequency(LevelState(3, 3), LevelState(4, 4), env) == pytest.approx(expected)


def test_breit_rabi_reduces_to_linear_at_low_field():
    linear = FieldEnvironment(B=1e-5)
    exact = FieldEnvironment(B=1e-5, breit_rabi=True)
    for level in LEVELS:
        assert zeeman_energy(level, exact) == pytest.approx(zeeman_energy(level, linear), abs=100.0)


def test_negative_field_is_rejected():
    with pytest.raises(DomainError):
        FieldEnvironment(B=-1.0)


def test_clebsch_gordan_completeness():
    for m4 in range(-4, 5):
        total = sum(clebsch_gordan_factor(m3, q, m4) ** 2
                    for q in (-1, 0, 1) for m3 in range(-3, 4) if m3 + q == m4)
        assert total == pytest.approx(1.0, abs=1e-12)


def test_stretched_coupling_is_unity():
    assert clebsch_gordan_factor(3, 1, 4) == pytest.approx(1.0)


def test_selection_rules():
    pol = (1.0, 1.0, 1.0)
    assert mw_coupling(LevelState(3, 0), LevelState(4, 2), pol) == 0
    assert mw_coupling(LevelState(3, 0), LevelState(4, 1), (0, 0, 0)) == 0
    assert abs(mw_coupling(LevelState(3, 0), LevelState(4, 1), pol)) > 0
    assert pure_polarization(LevelState(3, 0), LevelState(4, -1)) == (1, 0, 0)
    with pytest.raises(DomainError):
        pure_polarization(LevelState(3, 0), LevelState(4, 3))


def test_cross_manifold_pairs_cover_all():
    assert len(list(cross_manifold_pairs())) == 7 * 9


def test_bright_scattering_rate():
    p = ScatterParams()
    assert scattering_rate_bright(p) == pytest.approx(2.0 * math.pi * 5.2e6 * 3.0 / 40.0)
    assert scattering_rate_bright(ScatterParams(saturation=math.inf)) == pytest.approx(p.gamma / 2)


def test_offresonant_scattering_rate():
    assert scattering_rate_offresonant(ScatterParams()) == pytest.approx(3.9588, rel=1e-3)


def test_quadrupole_ratio_matches_far_detuned_limit():
    gamma = 2 * math.pi * 124e3
    s = 0.2
    approx = sum((1 + s) * gamma ** 2 / (4 * ratio * (2 * math.pi * offset) ** 2)
                 for offset, ratio in ((127.4e6, 1.7), (233.6e6, 3.2)))
    assert quadrupole_cycling_ratio() == pytest.approx(approx, rel=1e-4)
    assert quadrupole_cycling_ratio() == pytest.approx(1.936e-7, rel=1e-3)


def test_quadrupole_ratio_scales_with_linewidth_squared():
    base = quadrupole_cycling_ratio()
    wide = quadrupole_cycling_ratio(gamma=2 * 2 * math.pi * 124e3)
    assert wide / base == pytest.approx(4.0, rel=1e-4)


def test_quadrupole_ratio_without_leak_paths():
    assert quadrupole_cycling_ratio(hf_offset_5=math.inf, hf_offset_4=math.inf) == 0.0
    with pytest.raises(DomainError):
        quadrupole_cycling_ratio(saturation_6=0.0)


def test_recoil_energy_of_cycling_line():
    # Cs D2 recoil frequency 2.0663 kHz
    assert recoil_energy() / (2 * math.pi * 1.054571817e-34) == pytest.approx(2.0663e3, rel=1e-3)
