import numpy as np
import pytest

from mcm_sim.errors import DomainError
from mcm_sim.trap import blackman_ramp, default_trap_plan, scale_trap_plan, trap_ramp


def test_blackman_ramp_endpoints_and_monotonicity():
    assert blackman_ramp(0.0) == pytest.approx(0.0)
    assert blackman_ramp(1.0) == pytest.approx(1.0)
    values = [blackman_ramp(u) for u in np.linspace(0, 1, 101)]
    assert all(b >= a for a, b in zip(values, values[1:]))
    assert blackman_ramp(-1.0) == 0.0 and blackman_ramp(2.0) == pytest.approx(1.0)


def test_small_array_raises_the_ancilla_and_holds_neighbours():
    plan = default_trap_plan(0.85e-3, 1.8e-3)
    assert plan.ancilla_sites == (4,)
    assert plan.data_sites == (1, 3, 5, 7)
    assert plan.site_depth(4, 1.0) == pytest.approx(1.8e-3)
    for site in plan.data_sites:
        assert plan.site_depth(site, 1.0) == pytest.approx(0.85e-3)
    for site in plan.corner_sites:
        assert plan.site_depth(site, 1.0) == pytest.approx(0.85e-3 ** 2 / 1.8e-3)
    np.testing.assert_allclose(plan.start_depths, np.full((3, 3), 0.85e-3))


def test_large_array_boosts_input_power():
    plan = scale_trap_plan(5, 0.85e-3, 1.8e-3, hold="minus")
    assert plan.ancilla_sites == (6, 8, 16, 18)
    assert len(plan.data_sites) == 9
    assert plan.boost > 1.0
    for site in plan.data_sites:
        assert plan.site_depth(site, 1.0) == pytest.approx(0.85e-3)
    for site in plan.ancilla_sites:
        assert plan.site_depth(site, 1.0) == pytest.approx(1.8e-3)


def test_ramp_up_and_down_are_mirror_images():
    plan = default_trap_plan()
    np.testing.assert_allclose(trap_ramp(plan, 0.0), plan.start_depths)
    np.testing.assert_allclose(trap_ramp(plan, plan.duration), plan.end_depths)
    np.testing.assert_allclose(trap_ramp(plan, plan.duration, "down"), plan.start_depths)
    np.testing.assert_allclose(trap_ramp(plan, 0.3 * plan.duration, "down"),
                               trap_ramp(plan, 0.7 * plan.duration))


def test_invalid_plans():
    with pytest.raises(DomainError):
        scale_trap_plan(4)
    with pytest.raises(DomainError):
        scale_trap_plan(3, hold="plus")
    plan = default_trap_plan()
    with pytest.raises(DomainError):
        trap_ramp(plan, 2 * plan.duration)
    with pytest.raises(DomainError):
        trap_ramp(plan, 0.0, "sideways")
