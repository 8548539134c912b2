import math

import numpy as np
import pytest

from mcm_sim.atomic_model import QUBIT_0, STRETCHED
from mcm_sim.executor import clock_frame, ideal_section_unitary, phase_gate_fidelity, run_site
from mcm_sim.pulse_engine import AtomState, Propagator
from mcm_sim.sequence import build_mcm_sequence, compensation_phase


def test_phase_gate_fidelity_of_a_pure_phase():
    fidelity, phase = phase_gate_fidelity(np.diag([1.0, np.exp(0.3j)]))
    assert fidelity == pytest.approx(1.0)
    assert phase == pytest.approx(0.3)
    fidelity, _ = phase_gate_fidelity(np.array([[0, 1], [1, 0]], dtype=complex))
    assert fidelity == 0.0


def test_clock_frame_is_trivial_for_the_clock_carrier(env):
    np.testing.assert_allclose(clock_frame(env, 1e-3), [1.0, 1.0], atol=1e-12)


def test_prep_reaches_the_clock_state(config, env):
    ir = build_mcm_sequence(config, "0", output=None, include_mcm=False)
    outcome = run_site(ir, ir.data_sites[0], AtomState.from_level(STRETCHED), Propagator(env), sections={"prep"})
    assert outcome.state.population(QUBIT_0) == pytest.approx(1.0, abs=5e-3)
    assert not outcome.reached_blowaway


def test_run_stops_at_the_blowaway(config, env):
    ir = build_mcm_sequence(config, "0", output=None, include_mcm=False)
    outcome = run_site(ir, ir.data_sites[0], AtomState.from_level(STRETCHED), Propagator(env))
    assert outcome.reached_blowaway


@pytest.fixture(scope="module")
def measurement_map(config):
    ir = build_mcm_sequence(config, "0", output=None)
    return ideal_section_unitary(ir, config.environment(), ir.data_sites[0], "mcm",
                                 window=config.calibration.window)


def test_measurement_is_a_phase_gate_on_data_qubits(measurement_map):
    fidelity, _ = phase_gate_fidelity(measurement_map)
    assert fidelity >= 0.9999


def test_compensation_phase_matches_the_section_map(config, measurement_map):
    _, phase = phase_gate_fidelity(measurement_map)
    compensation = compensation_phase(config)
    difference = (compensation - phase + math.pi) % (2 * math.pi) - math.pi
    assert difference == pytest.approx(0.0, abs=1e-9)
