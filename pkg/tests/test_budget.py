import math

import numpy as np
import pytest

from mcm_sim import constants as C
from mcm_sim.atomic_model import ScatterParams
from mcm_sim.budget import (
    BudgetParams,
    branching_weights,
    epsilon_opt,
    light_shifts,
    optimize_total_error,
    p_min,
    p_scat,
    population_errors,
    regime,
    rotation_error,
    shelved_cost,
    shiftout_settings,
    total_error,
)
from mcm_sim.errors import DomainError

GAMMA_7P = 1.0 / 165e-9
GAMMA_5D = 1.0 / 1280e-9


def test_minimum_errors_for_both_intermediate_states():
    assert p_min(GAMMA_7P, C.OMEGA_HF) == pytest.approx(0.0029, rel=0.03)
    assert p_min(GAMMA_5D, C.OMEGA_HF) == pytest.approx(0.00075, rel=0.01)


def test_closed_form_optimum_is_stationary():
    eps = epsilon_opt(GAMMA_7P, C.OMEGA_HF)
    assert total_error(eps, GAMMA_7P, C.OMEGA_HF) == pytest.approx(p_min(GAMMA_7P, C.OMEGA_HF), rel=1e-12)
    assert total_error(eps, GAMMA_7P, C.OMEGA_HF) == pytest.approx(15 / 16 * eps ** 2, rel=1e-12)
    two_pi = (2 * math.pi * GAMMA_7P / (15 * C.OMEGA_HF)) ** (1 / 3)
    assert total_error(two_pi, GAMMA_7P, C.OMEGA_HF) > total_error(eps, GAMMA_7P, C.OMEGA_HF)


@pytest.mark.parametrize("gamma", [GAMMA_7P, GAMMA_5D])
def test_numeric_optimum_agrees(gamma):
    optimum = optimize_total_error(gamma)
    assert optimum.relative_gap <= 1e-6
    assert optimum.p_min_numeric == pytest.approx(optimum.p_min, rel=1e-9)


def test_total_error_rejects_non_positive_epsilon():
    with pytest.raises(DomainError):
        total_error(0.0, GAMMA_7P, C.OMEGA_HF)
    with pytest.raises(DomainError):
        optimize_total_error(-1.0)


@pytest.mark.parametrize("eps", [0.03, 0.05, 0.08])
def test_leading_order_population_errors(eps):
    errors = population_errors(eps)
    # envelopes eps^2/4 and eps^2; truncation is O(eps^2) relative to them
    assert errors.c0 == pytest.approx(errors.c0_leading, abs=2 * eps ** 2 * eps ** 2 / 4)
    assert errors.c1 == pytest.approx(errors.c1_leading, abs=2 * eps ** 2 * eps ** 2)


def test_leading_order_phase_sign():
    # pi/eps sits at pi/2 mod 2 pi, where the sign of the eps phase matters most
    eps = 1 / 20.5
    errors = population_errors(eps)
    flipped = eps ** 2 / 2 * (1 - math.cos(math.pi / eps - math.pi * eps / 2))
    assert abs(errors.c1 - errors.c1_leading) < abs(errors.c1 - flipped)


def test_population_errors_average_to_rotation_error():
    inverse = np.linspace(20.0, 50.0, 30001)
    ratios = [population_errors(1.0 / u, leading=False).average / rotation_error(1.0 / u) for u in inverse]
    assert np.mean(ratios) == pytest.approx(1.0, rel=0.01)
    with pytest.raises(DomainError):
        population_errors(1.5)


def test_branching_weights():
    weights = branching_weights()
    assert weights["dark"] == pytest.approx(11 / 24)
    assert weights["bright"] == pytest.approx(5 / 24)
    assert weights["average"] == pytest.approx(1 / 3)


def test_light_shift_forms():
    params = BudgetParams.from_epsilon(0.1)
    assert params.epsilon == pytest.approx(0.1, rel=1e-12)
    shifts = light_shifts(params)
    d4 = params.detuning
    assert shifts.exact_over_large == pytest.approx(abs(d4 / (d4 - params.omega_q)), rel=1e-12)
    with pytest.raises(DomainError):
        light_shifts(BudgetParams(omega_459=1.0, detuning=C.OMEGA_HF))


def test_scattering_estimates_agree_in_the_asymptotic_form():
    params = BudgetParams.from_epsilon(0.05)
    estimate = p_scat(params)
    assert estimate.from_dls == pytest.approx(estimate.large_detuning, rel=1e-12)
    assert 0 < estimate.exact < estimate.large_detuning


def test_regime_report():
    report = regime(BudgetParams())
    assert report["long_pulse"]
    assert not report["large_detuning"]
    assert report["detuning_over_omega_q"] == pytest.approx(24e9 / 9.19263177e9)


def test_shelved_cost_for_a_fixed_window():
    cost = shelved_cost(ScatterParams(), 1.0, duration=4e-3)
    assert cost.photons == pytest.approx(9801.8, rel=1e-4)
    assert cost.shelved_rate == pytest.approx(3.9588, rel=1e-3)
    assert cost.error == pytest.approx(0.015835, rel=1e-3)
    exact = shelved_cost(ScatterParams(), 1.0, duration=4e-3, exact=True)
    assert exact.error == pytest.approx(-math.expm1(-cost.error), rel=1e-12)


def test_shelved_cost_for_a_photoelectron_target():
    cost = shelved_cost(ScatterParams(), 0.15, target_photoelectrons=50)
    assert cost.photoelectrons == pytest.approx(50.0)
    assert cost.photons == pytest.approx(333.3, rel=1e-3)
    assert cost.duration == pytest.approx(136.0e-6, rel=1e-2)


def test_shelved_cost_needs_exactly_one_budget():
    with pytest.raises(DomainError):
        shelved_cost(ScatterParams(), 0.1)
    with pytest.raises(DomainError):
        shelved_cost(ScatterParams(), 0.1, duration=1e-3, target_photoelectrons=50)
    with pytest.raises(DomainError):
        shelved_cost(ScatterParams(), 0.0, target_photoelectrons=50)


def test_shiftout_settings_follow_epsilon():
    omega_mu = 2 * math.pi * 44.8e3
    settings = shiftout_settings(None, omega_mu)
    assert settings["epsilon"] == pytest.approx(epsilon_opt(GAMMA_7P, C.OMEGA_HF))
    assert abs(settings["dls"]) == pytest.approx(omega_mu / settings["epsilon"], rel=1e-9)
    assert settings["dls"] == pytest.approx(settings["shift_f4"] - settings["shift_f3"])
    assert 0 < settings["p_scat"] < 0.01
