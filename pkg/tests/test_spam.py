import math

import pytest
import sympy as sp

from mcm_sim.errors import ConfigError, DomainError
from mcm_sim.spam import (
    PROCESS_INPUTS,
    CorrectedFidelity,
    Measured,
    average_process_fidelity,
    correct_all,
    correct_ancilla,
    correct_data_fidelity,
    data_table,
    decompose_error_budget,
    load_spam_inputs,
    parse_spam_inputs,
)

PUBLISHED = {"x": 0.962, "-x": 0.974, "y": 0.966, "-y": 0.966, "0": 0.972, "1": 0.979}


@pytest.fixture(scope="module")
def inputs():
    return load_spam_inputs()


def test_data_table_matches_published_values(inputs):
    table = data_table(inputs.data)
    by_key = {row["key"]: row for row in table.rows}
    assert list(by_key) == list(PROCESS_INPUTS)
    for key, value in PUBLISHED.items():
        assert by_key[key]["corrected"]["value"] == pytest.approx(value, abs=0.002)
    assert table.raw_average.value == pytest.approx(0.938, abs=0.001)
    assert table.corrected_average.value == pytest.approx(0.970, abs=0.002)
    assert table.csv_rows()[0][0] == "input"
    assert table.csv_rows()[-1][0] == "Average"


def test_delta_method_matches_symbolic_derivatives():
    p, pm, r3, r4 = sp.symbols("p pm r3 r4")
    expr = (p - pm) / (r3 - r4)
    point = {p: 0.930, pm: 0.01, r3: 0.970, r4: 0.014}
    sigmas = {p: 0.008, pm: 0.01, r3: 0.003, r4: 0.002}
    exact = math.sqrt(sum(float(sp.diff(expr, s).subs(point)) ** 2 * sigmas[s] ** 2 for s in point))
    result = correct_data_fidelity(Measured(0.930, 0.008), Measured(0.01, 0.01),
                                   Measured(0.970, 0.003), Measured(0.014, 0.002))
    assert result.value == pytest.approx(float(expr.subs(point)), rel=1e-12)
    assert result.sigma == pytest.approx(exact, rel=1e-6)
    assert set(result.contributions) == {"P_DB", "P_DB_min", "R3prep", "R4prep"}


def test_ancilla_correction(inputs):
    a = inputs.ancilla
    args = [a.measured(k) for k in ("P1_D", "P2_B", "R_base", "R4prep", "R3prep", "R_BA")]
    dark, bright = correct_ancilla(*args)
    assert dark.value == pytest.approx(0.949, abs=0.001)
    assert bright.value == pytest.approx(0.953, abs=0.001)
    staged_dark, staged_bright = correct_ancilla(*args, propagation="staged")
    assert staged_dark.value == pytest.approx(dark.value, rel=1e-12)
    assert staged_bright.value == pytest.approx(bright.value, rel=1e-12)
    assert staged_dark.sigma == pytest.approx(0.008, abs=0.003)
    assert staged_bright.sigma == pytest.approx(0.011, abs=0.003)
    with pytest.raises(DomainError):
        correct_ancilla(*args, propagation="bootstrap")


def test_ancilla_joint_propagation_counts_each_input_once(inputs):
    p1, p2, rb, r4, r3, rba = sp.symbols("p1 p2 rb r4 r3 rba")
    denominator = sp.Rational(1, 2) - r4 + r3 - rb / 2 + rba
    exprs = ((p1 - (1 - rb) / 2) / denominator, (p2 - r4 + r3 - rb + rba) / denominator)
    names = dict(zip((p1, p2, rb, r4, r3, rba), ("P1_D", "P2_B", "R_base", "R4prep", "R3prep", "R_BA")))
    a = inputs.ancilla
    point = {s: a.measured(n).value for s, n in names.items()}
    sigmas = {s: a.measured(n).sigma for s, n in names.items()}
    results = correct_ancilla(*(a.measured(n) for n in names.values()))
    for expr, result in zip(exprs, results):
        exact = math.sqrt(sum(float(sp.diff(expr, s).subs(point)) ** 2 * sigmas[s] ** 2 for s in point))
        assert result.sigma == pytest.approx(exact, rel=1e-6)
    dark, bright = results
    assert dark.sigma == pytest.approx(0.0091, abs=5e-4)
    assert bright.sigma == pytest.approx(0.0058, abs=5e-4)
    staged = correct_ancilla(*(a.measured(n) for n in names.values()), propagation="staged")
    assert all(j.sigma < s.sigma for j, s in zip(results, staged))


def test_corrections_above_one_are_flagged_not_clamped():
    result = correct_data_fidelity(Measured(0.99), Measured(0.0), Measured(0.96), Measured(0.01))
    assert result.value > 1.0
    assert result.to_dict()["flag"] == "exceeds_one"


def test_denominators_must_be_positive():
    with pytest.raises(DomainError):
        correct_data_fidelity(Measured(0.9), Measured(0.0), Measured(0.01), Measured(0.5))
    with pytest.raises(DomainError):
        correct_ancilla(Measured(0.9), Measured(0.9), Measured(0.0), Measured(1.0),
                        Measured(0.0), Measured(0.0))


def test_average_uncertainty_modes(inputs):
    correlated = data_table(inputs.data).corrected_average
    independent = data_table(inputs.data, correlated=False).corrected_average
    assert correlated.value == pytest.approx(independent.value)
    assert correlated.sigma > independent.sigma
    with pytest.raises(DomainError):
        average_process_fidelity([CorrectedFidelity(0.9, 0.01, "P_DB")])


def test_invalid_inputs_report_their_path():
    with pytest.raises(ConfigError) as info:
        parse_spam_inputs({"data": {"P_DB_min": [1.2, 0.01], "R3prep": [0.9, 0.0], "R4prep": [0.0, 0.0]}})
    assert info.value.diagnostics[0]["path"].startswith("data.P_DB_min")
    with pytest.raises(ConfigError):
        load_spam_inputs("/nonexistent/spam.yaml")


def test_error_budget_terms(inputs):
    terms = decompose_error_budget(inputs)
    assert terms["eps_l_pre"]["value"] == pytest.approx(0.0115)
    assert terms["eps_prep"]["value"] == pytest.approx(0.015)
    assert terms["eps_BA"]["value"] == pytest.approx(0.005)
    assert terms["denominator_data"]["value"] == pytest.approx(0.956)


def test_full_report(inputs):
    report = correct_all(inputs)
    assert set(report) == {"data", "ancilla", "error_terms", "propagation"}
    assert report["propagation"] == {"average": "correlated", "ancilla": "joint"}
    report = correct_all(inputs, correlated=False, propagation="staged")
    assert report["propagation"] == {"average": "independent", "ancilla": "staged"}
