import math

import numpy as np
import pytest

from mcm_sim.atomic_model import QUBIT_0, STRETCHED, ScatterParams
from mcm_sim.errors import DomainError, FitError
from mcm_sim.pulse_engine import AtomState, NoiseModel
from mcm_sim.readout import (
    ABSENT,
    BRIGHT,
    DARK,
    Estimate,
    Histogram,
    ReadoutParams,
    ancilla_fidelities,
    camera_count,
    classify,
    fit_ramsey,
    loss_fraction,
    occupation_image,
    ramsey_phases,
    ramsey_scan,
    run_experiment,
    simulate_shot,
    spam_experiments,
)
from mcm_sim.sequence import build_dwell_sequence, build_mcm_sequence
from mcm_sim.spam import Measured, correct_ancilla


def _params(**changes):
    base = ReadoutParams(ScatterParams(), efficiency=1.0, background_mean=0.0, camera_sigma=0.0,
                         depump_probability=0.0, loss_enabled=False, recoil=2e-7)
    return base.with_(**changes)


def _dwell(params):
    return build_dwell_sequence(params.scatter, params.exposure)


def test_default_threshold(config):
    params = ReadoutParams.from_config(config)
    assert params.threshold_value == pytest.approx(1.0 + 6.4 * math.sqrt(1.0 + 2.5 ** 2))
    assert params.exposure == pytest.approx(4e-3)
    assert params.recoil > 0
    occupation = ReadoutParams.from_config(config, "occupation")
    assert occupation.exposure == pytest.approx(30e-3)


def test_estimate():
    est = Estimate.binomial(30, 100)
    assert est.value == pytest.approx(0.3)
    assert est.sigma == pytest.approx(math.sqrt(0.21 / 100))
    with pytest.raises(DomainError):
        Estimate.binomial(0, 0)


def test_camera_count_without_noise_counts_every_photon():
    rng = np.random.default_rng(0)
    assert camera_count(123, _params(), rng) == 123
    assert classify(19.0, 18.5) == BRIGHT
    assert classify(18.0, 18.5) == DARK


def test_bright_atom_scatters_at_the_cycling_rate():
    params = _params()
    record = simulate_shot(AtomState.from_level(STRETCHED), _dwell(params), params, np.random.default_rng(1))
    expected = params.bright_rate * params.exposure
    assert abs(record.photons - expected) < 5 * math.sqrt(expected)
    assert record.true_class == BRIGHT
    assert record.survived
    assert record.energy == pytest.approx(record.photons * 2e-7)


def test_dark_atom_without_leak_stays_dark():
    params = _params(scatter=ScatterParams(shelved_reduction=0.0))
    record = simulate_shot(AtomState.from_level(QUBIT_0), _dwell(params), params, np.random.default_rng(2))
    assert record.photons == 0
    assert record.true_class == DARK


def test_heating_loss_ends_the_fluorescence():
    params = _params(loss_enabled=True, recoil=1e-6, trap_depth=1e-4, initial_temperature=0.0)
    record = simulate_shot(AtomState.from_level(STRETCHED), _dwell(params), params, np.random.default_rng(3))
    assert not record.survived
    assert record.photons in (100, 101)
    assert 0.0 <= record.loss_time <= params.exposure


def test_histogram_sweep_and_threshold():
    counts = [0, 1, 2, 3, 2, 40, 45, 50, 38, 42]
    classes = [DARK] * 5 + [BRIGHT] * 5
    hist = Histogram(np.array(counts), classes, 18.5)
    threshold, error = hist.optimal_threshold()
    assert error == 0.0
    assert 3 < threshold < 38
    summary = hist.class_summary()
    assert summary[BRIGHT]["n"] == 5
    assert summary[DARK]["bright_fraction"] == 0.0
    assert sum(n for _, n in hist.to_csv_rows()) == 10
    merged = hist.merged(hist)
    assert merged.counts.size == 20
    with pytest.raises(DomainError):
        Histogram(np.array([1, 2]), [DARK], 1.0)
    with pytest.raises(DomainError):
        Histogram(np.array([1, 2]), [DARK, DARK], 1.0).sweep()


def test_fit_ramsey_recovers_a_sinusoid():
    phases = ramsey_phases(16)
    values = 0.5 + 0.4 * np.cos(phases - 1.0)
    fit = fit_ramsey(phases, values)
    assert fit.contrast == pytest.approx(0.8)
    assert fit.phase == pytest.approx(1.0)
    assert fit.minimum == pytest.approx(0.1)
    assert fit.residual == pytest.approx(0.0, abs=1e-12)


def test_fit_ramsey_rejects_degenerate_data():
    with pytest.raises(FitError):
        fit_ramsey(ramsey_phases(4), np.ones(4))
    with pytest.raises(FitError):
        fit_ramsey(ramsey_phases(16), np.full(16, 0.5))


def test_ramsey_without_measurement_has_full_contrast(config):
    fit = ramsey_scan(config, include_mcm=False, noise=False)
    assert fit.contrast == pytest.approx(1.0, abs=1e-2)
    assert fit.residual < 1e-3


@pytest.fixture(scope="module")
def quiet_ir(config):
    return {label: build_mcm_sequence(config, label, compensation=0.0, trap_shift=0.0) for label in ("0", "1")}


def test_ancilla_outcomes_follow_the_input(config, quiet_ir):
    zero = run_experiment(config, "0", shots=30, seed=11, ir=quiet_ir["0"], noise=NoiseModel())
    one = run_experiment(config, "1", shots=30, seed=11, ir=quiet_ir["1"], noise=NoiseModel())
    assert zero.ancilla_fraction(DARK).value >= 0.8
    assert one.ancilla_fraction(BRIGHT).value >= 0.8
    assert zero.shots == 30
    assert zero.data_retained.shape == (30, 1)


def test_experiments_are_reproducible(config, quiet_ir):
    a = run_experiment(config, "0", shots=5, seed=4, ir=quiet_ir["0"], noise=NoiseModel())
    b = run_experiment(config, "0", shots=5, seed=4, ir=quiet_ir["0"], noise=NoiseModel())
    assert [r.count for r in a.records] == [r.count for r in b.records]
    assert (a.data_retained == b.data_retained).all()


def test_experiment_needs_a_shot(config, quiet_ir):
    with pytest.raises(DomainError):
        run_experiment(config, "0", shots=0, ir=quiet_ir["0"], noise=NoiseModel())


def test_absent_atoms_never_read_bright(config):
    for column in ("mid-circuit", "occupation"):
        hist = occupation_image(config, shots=10_000, seed=3, present=0.0, column=column)
        absent = hist.class_summary()[ABSENT]
        assert absent["n"] == 10_000
        assert absent["bright_fraction"] < 1e-3


def test_loss_never_decreases_with_heating(config):
    base = ReadoutParams.from_config(config).with_(depump_probability=0.0)
    per_photon = base.trap_depth / (base.bright_rate * base.exposure)
    fractions = [loss_fraction(base.with_(dff=k * per_photon), 2_000, seed=5).value
                 for k in (0.0, 0.5, 1.0, 2.0, 4.0)]
    assert fractions == sorted(fractions)
    assert fractions[-1] > 0.99
    with pytest.raises(DomainError):
        loss_fraction(base, 0, seed=5)


def test_retention_never_increases_with_injected_loss(config):
    retained = []
    for loss in (0.0, 0.02, 0.05, 0.2):
        noisy = config.updated(spam={"enabled": True, "loss_post": loss})
        retained.append(spam_experiments(noisy, shots=300, seed=2)["R3prep"].value)
    assert retained == sorted(retained, reverse=True)
    assert retained[0] > retained[-1]


@pytest.mark.slow
def test_spam_correction_recovers_injected_fidelities(config):
    noisy = config.updated(spam={"enabled": True})
    fid = ancilla_fidelities(noisy, shots=4_000, seed=21)
    retention = spam_experiments(noisy, shots=4_000, seed=21)
    measured = [Measured(e.value, e.sigma) for e in (fid["P1_D"], fid["P2_B"], retention["R_base"],
                                                     retention["R4prep"], retention["R3prep"], retention["R_BA"])]
    dark, bright = correct_ancilla(*measured)
    for corrected, truth in ((dark, fid["true_dark"]), (bright, fid["true_bright"])):
        assert abs(corrected.value - truth.value) <= 2 * math.hypot(corrected.sigma, truth.sigma)
