import math

import numpy as np
import pytest
from scipy.integrate import quad

from mcm_sim.cooling import (
    CoolingParams,
    delta_U,
    delta_U_trajectory,
    excitation_rate,
    mean_cooling_rate,
    mean_scattering_rate,
    molasses_heating,
    monte_carlo_cooling_rate,
    position_density,
    rate_half_width,
    scan,
    scan_grid,
)
from mcm_sim.errors import DomainError


@pytest.fixture(scope="module")
def params(config):
    return CoolingParams.from_config(config)


def test_params_from_config(params):
    assert params.gamma == pytest.approx(2 * math.pi * 124e3)
    assert params.omega_g == pytest.approx(0.32 * params.gamma)
    assert params.omega_e == pytest.approx(2 * params.omega_g)
    rescaled = params.at_ratio(0.5)
    assert rescaled.omega_g == pytest.approx(0.5 * params.gamma)
    assert rescaled.omega_e / rescaled.omega_g == pytest.approx(2.0)


@pytest.mark.parametrize("fraction", [0.0, 0.3, 0.5, 0.9, 1.0])
def test_closed_form_matches_trajectory_average(params, fraction):
    x0 = fraction * params.x_m
    scale = abs(delta_U(0.0, params))
    assert delta_U(x0, params) == pytest.approx(delta_U_trajectory(x0, params), abs=1e-6 * scale)


def test_cycles_cool_near_the_center_and_heat_at_the_turning_point(params):
    assert delta_U(0.0, params) < 0
    assert delta_U(params.x_m, params) > 0
    assert delta_U(params.x_m / math.sqrt(2), params) == pytest.approx(0.0, abs=1e-12 * abs(delta_U(0.0, params)))
    with pytest.raises(DomainError):
        delta_U(1.01 * params.x_m, params)


def test_position_density_is_normalized(params):
    total, _ = quad(lambda x: float(position_density(x, params)), -10 * params.sigma, 10 * params.sigma)
    assert total == pytest.approx(1.0, rel=1e-8)


def test_half_width(params):
    x = rate_half_width(params)
    assert float(excitation_rate(x, params)) == pytest.approx(0.5 * float(excitation_rate(0.0, params)), rel=1e-9)


def test_mean_cooling_rate_unit_systems_agree(params):
    si = mean_cooling_rate(params)
    scaled = mean_cooling_rate(params, units="scaled")
    assert si < 0
    assert scaled == pytest.approx(si, rel=1e-4)
    with pytest.raises(DomainError):
        mean_cooling_rate(params, units="cgs")


@pytest.mark.slow
def test_quadrature_matches_monte_carlo(params):
    # 16M samples, eight independent streams
    draws = [monte_carlo_cooling_rate(params, 2_000_000, rng=np.random.default_rng(seed)) for seed in range(8)]
    assert float(np.mean(draws)) == pytest.approx(mean_cooling_rate(params), rel=1e-2)


def test_scattering_rate_is_bounded_by_the_central_rate(params):
    rate = mean_scattering_rate(params)
    assert 0 < rate <= float(excitation_rate(0.0, params)) * (1 + 1e-9)


def test_molasses_heating():
    assert molasses_heating(1e4) == pytest.approx(1.98, rel=1e-2)
    assert molasses_heating(0.0) == 0.0
    with pytest.raises(DomainError):
        molasses_heating(-1.0)


def test_scan_shape(params):
    grid = scan_grid(0.1, 1.0, 5)
    result = scan(params, grid, [1e4, 1e5])
    assert len(result.points) == 5
    assert result.points[0].omega_g_over_gamma == pytest.approx(0.1)
    rows = result.csv_rows()
    assert len(rows) == 6 and len(rows[0]) == 5
    assert set(result.crossovers) == {1e4, 1e5}
    assert result.best.cooling_rate == max(pt.cooling_rate for pt in result.points)
    document = result.to_document()
    assert document["max_cooling_rate_uK_per_ms"] == result.best.cooling_rate


def test_scan_rejects_bad_ranges(params):
    with pytest.raises(DomainError):
        scan(params, [])
    with pytest.raises(DomainError):
        scan_grid(0.0, 1.0, 5)
    np.testing.assert_allclose(scan_grid(0.2, 1.0, 1), [0.2])


def test_invalid_params():
    with pytest.raises(DomainError):
        CoolingParams(temperature=0.0)
    with pytest.raises(DomainError):
        CoolingParams(omega_e=0.0)
