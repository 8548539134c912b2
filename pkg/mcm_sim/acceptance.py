"""Published-number acceptance suite behind ``reproduce-paper``.

Each criterion yields one summary row made of named sub-checks. A row
passes when every sub-check does and fails on any undocumented miss; a miss
with a recorded reason marks the row as a deviation. Rows filtered out or
left out of a fast run are reported as skipped, so the table always has one
row per criterion.
"""
from __future__ import annotations

import hashlib
import logging
import math
import time
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from .artifacts import to_json
from .atomic_model import LevelState, cross_manifold_pairs, quadrupole_cycling_ratio
from .budget import optimize_total_error, shelved_cost
from .calibration import calibrate, shelved_coherence, simulated_t2_star, zeeman_sigma
from .config import RunConfig
from .cooling import (
    CoolingParams,
    delta_U,
    delta_U_trajectory,
    molasses_heating,
    scan,
    scan_grid,
)
from .errors import MCMError, SolverError
from .executor import ideal_section_unitary, phase_gate_fidelity
from .pulse_engine import (
    AtomState,
    apply_pulse,
    composite_transfer,
    corpse,
    plain_pulse,
    pulse_unitary,
    solve_horn_phase,
    two_level_transfer,
    two_pulse_shelving_solve,
)
from .readout import (
    ABSENT,
    ReadoutParams,
    ancilla_fidelities,
    loss_fraction,
    occupation_image,
    ramsey_scan,
    run_experiment,
    spam_experiments,
)
from .sequence import CLOCK, ECHO_SWAP, build_mcm_sequence, echo_triplet
from .spam import PROCESS_INPUTS, Measured, correct_ancilla, data_table, load_spam_inputs
from .units import parse_quantity

logger = logging.getLogger(__name__)

PASS, FAIL, DEVIATION, SKIPPED = "pass", "fail", "deviation", "skipped"

ANCILLA_CORRECTED = {"P_D_given_0": (0.949, 0.008), "P_B_given_1": (0.953, 0.011)}
DATA_CORRECTED = dict(zip(PROCESS_INPUTS, (0.962, 0.974, 0.966, 0.966, 0.972, 0.979)))
DATA_AVERAGES = {"raw": 0.938, "corrected": 0.970}
STATISTICAL_SHOTS = 10_000

# the rate ratio scales as gamma^2; the stated 124 kHz line width, I/I_sat = 0.2 and
# 127.4 / 233.6 MHz offsets give 1.9e-7, so the quoted 5.9e-5 acts as an upper bound
QUADRUPOLE_DEVIATION = "stated inputs give r_nc/r_c ~ 1.9e-7; the quoted value is only an upper bound"


@dataclass(frozen=True)
class SubCheck:
    """One measured-vs-target comparison.

    ``deviation`` names a documented reason why a published number is not
    reproduced; such a miss is reported as a deviation instead of a failure.
    """

    name: str
    measured: Any
    target: Any
    tolerance: str
    passed: bool
    deviation: str = ""

    @property
    def status(self) -> str:
        if self.passed:
            return PASS
        return DEVIATION if self.deviation else FAIL

    def to_dict(self) -> Dict[str, Any]:
        doc = {"name": self.name, "measured": self.measured, "target": self.target,
               "tolerance": self.tolerance, "status": self.status}
        if self.deviation and not self.passed:
            doc["deviation"] = self.deviation
        return doc


@dataclass
class CriterionResult:
    id: int
    module: str
    name: str
    checks: List[SubCheck] = field(default_factory=list)
    skipped: bool = False
    error: Optional[str] = None

    @property
    def status(self) -> str:
        if self.skipped:
            return SKIPPED
        if self.error is not None or not self.checks:
            return FAIL
        statuses = {c.status for c in self.checks}
        if FAIL in statuses:
            return FAIL
        return DEVIATION if DEVIATION in statuses else PASS

    def to_dict(self) -> Dict[str, Any]:
        doc = {"id": self.id, "module": self.module, "name": self.name, "status": self.status,
               "checks": [c.to_dict() for c in self.checks]}
        if self.error is not None:
            doc["error"] = self.error
        return doc


@dataclass
class AcceptanceReport:
    rows: List[CriterionResult]
    seed: int

    @property
    def ok(self) -> bool:
        return all(r.status != FAIL for r in self.rows)

    @property
    def failures(self) -> List[CriterionResult]:
        return [r for r in self.rows if r.status == FAIL]

    def to_document(self) -> Dict[str, Any]:
        counts = {s: sum(1 for r in self.rows if r.status == s) for s in (PASS, FAIL, DEVIATION, SKIPPED)}
        return {"seed": self.seed, "ok": self.ok, "summary": counts,
                "criteria": [r.to_dict() for r in self.rows]}

    def csv_rows(self) -> List[List[Any]]:
        out: List[List[Any]] = [["id", "module", "criterion", "check", "measured", "target",
                                 "tolerance", "status"]]
        for row in self.rows:
            if not row.checks:
                out.append([row.id, row.module, row.name, "", "", "", "", row.status])
            for c in row.checks:
                out.append([row.id, row.module, row.name, c.name, c.measured, c.target,
                            c.tolerance, c.status])
        return out


# --- sub-check helpers ---------------------------------------------------------

def within(name: str, measured: float, target: float, abs_tol: Optional[float] = None,
           rel_tol: Optional[float] = None, deviation: str = "") -> SubCheck:
    if abs_tol is not None:
        ok = abs(measured - target) <= abs_tol + 1e-12
        tol = f"+-{abs_tol:g}"
    else:
        ok = abs(measured - target) <= rel_tol * abs(target)
        tol = f"+-{100 * rel_tol:g}%"
    return SubCheck(name, measured, target, tol, bool(ok), deviation)


def at_least(name: str, measured: float, bound: float) -> SubCheck:
    return SubCheck(name, measured, bound, ">=", bool(measured >= bound))


def at_most(name: str, measured: float, bound: float) -> SubCheck:
    return SubCheck(name, measured, bound, "<=", bool(measured <= bound))


def in_band(name: str, measured: float, low: float, high: float) -> SubCheck:
    return SubCheck(name, measured, [low, high], "band", bool(low <= measured <= high))


def holds(name: str, condition: bool, measured: Any = None) -> SubCheck:
    return SubCheck(name, measured, True, "exact", bool(condition))


# --- registry ------------------------------------------------------------------

@dataclass(frozen=True)
class Criterion:
    id: int
    module: str
    name: str
    fn: Callable[..., List[SubCheck]]
    slow: bool = False

    def matches(self, tokens: Sequence[str]) -> bool:
        for token in tokens:
            if token == str(self.id) or self.module == token or self.module.split("-")[0] == token:
                return True
        return False


CRITERIA: List[Criterion] = []


def criterion(id: int, module: str, name: str, slow: bool = False):
    def register(fn):
        CRITERIA.append(Criterion(id, module, name, fn, slow))
        return fn
    return register


@criterion(1, "spam-analytics", "SPAM ancilla correction")
def check_ancilla_correction(config: RunConfig, seed: int, shots: int) -> List[SubCheck]:
    a = load_spam_inputs().ancilla
    args = [a.measured(k) for k in ("P1_D", "P2_B", "R_base", "R4prep", "R3prep", "R_BA")]
    joint = correct_ancilla(*args)
    # the quoted sigmas propagate eps_l,pre and eps_prep as separate quantities
    staged = correct_ancilla(*args, propagation="staged")
    checks = []
    for name, result, quoted in zip(("P_D_given_0", "P_B_given_1"), joint, staged):
        value, sigma = ANCILLA_CORRECTED[name]
        checks.append(within(name, result.value, value, abs_tol=0.001))
        checks.append(within(f"{name}.sigma[staged]", quoted.sigma, sigma, abs_tol=0.003))
        checks.append(at_most(f"{name}.sigma[joint]", result.sigma, quoted.sigma))
    return checks


@criterion(2, "spam-analytics", "SPAM data-qubit correction")
def check_data_correction(config: RunConfig, seed: int, shots: int) -> List[SubCheck]:
    table = data_table(load_spam_inputs().data)
    checks = [within(f"corrected[{row['key']}]", row["corrected"]["value"],
                     DATA_CORRECTED[row["key"]], abs_tol=0.002) for row in table.rows]
    checks.append(within("average.raw", table.raw_average.value, DATA_AVERAGES["raw"], abs_tol=0.002))
    checks.append(within("average.corrected", table.corrected_average.value,
                         DATA_AVERAGES["corrected"], abs_tol=0.002))
    return checks


@criterion(3, "error-budget", "Shift-out error-budget optimum")
def check_budget_optimum(config: RunConfig, seed: int, shots: int) -> List[SubCheck]:
    omega_q = config.physics.si("hyperfine")
    short = optimize_total_error(1.0 / config.shiftout.si("lifetime"), omega_q)
    long = optimize_total_error(1.0 / config.budget.si("alt_lifetime"), omega_q)
    return [
        within("p_min[7p]", short.p_min, 0.0029, rel_tol=0.03),
        # quoted as "about 0.07%"; the closed form gives 0.075%
        within("p_min[5d]", long.p_min, 0.0007, rel_tol=0.10),
        at_most("epsilon_gap[7p]", short.relative_gap, 1e-6),
        at_most("epsilon_gap[5d]", long.relative_gap, 1e-6),
    ]


@criterion(4, "error-budget", "Photon and time budget")
def check_photon_budget(config: RunConfig, seed: int, shots: int) -> List[SubCheck]:
    scatter = config.scatter_params("mid-circuit")
    window = shelved_cost(scatter, config.readout.collection_efficiency,
                          duration=config.readout.si("exposure"))
    target = shelved_cost(scatter, config.budget.target_efficiency,
                          target_photoelectrons=config.budget.photoelectron_target)
    return [
        within("photons[4ms]", window.photons, 9900.0, rel_tol=0.10),
        within("shelved_rate", window.shelved_rate, 4.0, rel_tol=0.15),
        within("shelved_error[4ms]", window.error, 0.016, rel_tol=0.15),
        within("photons[50pe]", target.photons, 330.0, rel_tol=0.15),
        within("duration[50pe]", target.duration, 130e-6, rel_tol=0.15),
        within("shelved_error[50pe]", target.error, 5e-4, rel_tol=0.15),
    ]


@criterion(5, "atomic-model", "Quadrupole cycling ratio")
def check_quadrupole_ratio(config: RunConfig, seed: int, shots: int) -> List[SubCheck]:
    value = quadrupole_cycling_ratio()
    far = quadrupole_cycling_ratio(hf_offset_5=math.inf, hf_offset_4=math.inf)
    return [
        within("r_nc/r_c", value, 5.9e-5, rel_tol=0.05, deviation=QUADRUPOLE_DEVIATION),
        at_most("r_nc/r_c.bound", value, 5.9e-5),
        holds("far_offset_limit", far == 0.0, far),
    ]


@criterion(6, "cooling-model", "Sisyphus cooling rate")
def check_cooling(config: RunConfig, seed: int, shots: int) -> List[SubCheck]:
    block = config.cooling
    params = CoolingParams.from_config(config)
    rates = [parse_quantity(r, "rate") for r in block.molasses_rates]
    result = scan(params, scan_grid(block.scan_min, block.scan_max, block.scan_points), rates)
    scale = abs(delta_U(0.0, params))
    worst = 0.0
    for x0 in np.linspace(-params.x_m, params.x_m, 9):
        worst = max(worst, abs(delta_U(x0, params) - delta_U_trajectory(x0, params)) / scale)
    return [
        at_least("max_cooling_rate_uK_per_ms", result.best.cooling_rate, 40.0),
        at_most("delta_U_vs_trajectory", worst, 1e-6),
        holds("molasses_heating_positive", all(molasses_heating(r) > 0 for r in rates)),
    ]


def _populations(ops, env, offset: float) -> np.ndarray:
    state, t = AtomState.from_level(LevelState(3, 0)), 0.0
    for op in ops:
        state = apply_pulse(state, replace(op, phase=op.phase + offset), env, t0=t)
        t += op.duration
    return state.populations()


@criterion(7, "pulse-engine", "Pulse engine properties")
def check_pulse_engine(config: RunConfig, seed: int, shots: int) -> List[SubCheck]:
    env = config.environment()
    rng = np.random.default_rng(seed)
    pairs = [p for p in cross_manifold_pairs() if abs(p[0].m - p[1].m) <= 1]
    worst = 0.0
    for _ in range(1000):
        pair = pairs[rng.integers(len(pairs))]
        op = plain_pulse(pair, 2.0 * math.pi * rng.uniform(10e3, 100e3), rng.uniform(0.0, 4.0 * math.pi),
                         rng.uniform(0.0, 2.0 * math.pi), 2.0 * math.pi * rng.uniform(-50e3, 50e3))
        U = pulse_unitary(op, env, t0=rng.uniform(0.0, 1e-3))
        worst = max(worst, float(np.linalg.norm(U.conj().T @ U - np.eye(U.shape[0]), 2)))

    rabi = config.rabi(*CLOCK)
    plain_error = 1.0 - composite_transfer([plain_pulse(CLOCK, rabi)], 0.05 * rabi)
    corpse_error = 1.0 - composite_transfer(corpse(CLOCK, rabi), 0.05 * rabi)

    lower_rabi = config.rabi(LevelState(3, 0), LevelState(4, -1))
    horn = solve_horn_phase(config.horn_drive(), config.calibration.shelving_ratio, lower_rabi)
    transferred = two_level_transfer(lower_rabi, 0.0, horn.duration)
    returned = 1.0 - two_level_transfer(horn.ratio * lower_rabi, 0.0, horn.duration)

    ops = [plain_pulse(CLOCK, rabi, math.pi / 2.0)] + corpse(ECHO_SWAP, config.rabi(*ECHO_SWAP))
    ops += [plain_pulse(pairs[rng.integers(len(pairs))], 2.0 * math.pi * rng.uniform(20e3, 80e3),
                        rng.uniform(0.0, 2.0 * math.pi), rng.uniform(0.0, 2.0 * math.pi)) for _ in range(10)]
    reference = _populations(ops, env, 0.0)
    covariance = max(float(np.max(np.abs(_populations(ops, env, offset) - reference))) for offset in (0.7, 5.0))

    sigma = zeeman_sigma(config)
    dwell = config.readout.si("exposure")
    echo = [op for group in echo_triplet(config) for op in group]
    plain_contrast = shelved_coherence(env, sigma, dwell)
    echo_contrast = shelved_coherence(env, sigma, dwell, echo=echo)

    transfers = [two_pulse_shelving_solve(r).transfer for r in np.linspace(0.25, 0.75, 20)]
    rejected = 0
    for r in (0.2, 0.8):
        try:
            two_pulse_shelving_solve(r)
        except SolverError:
            rejected += 1
    return [
        at_most("unitarity", worst, 1e-9),
        at_most("phase_covariance", covariance, 1e-9),
        at_least("echo.contrast", echo_contrast, plain_contrast),
        at_most("corpse_over_plain", corpse_error / plain_error, 0.1),
        at_least("horn.transfer", transferred, 0.9999),
        at_least("horn.return", returned, 0.9999),
        at_least("two_pulse.min_transfer", min(transfers), 0.999),
        holds("two_pulse.rejects_outside", rejected == 2, rejected),
    ]


@criterion(8, "sequence-compiler", "Sequence audit")
def check_sequence(config: RunConfig, seed: int, shots: int) -> List[SubCheck]:
    ir = build_mcm_sequence(config, "0", output=None)
    counts = ir.counts()
    M = ideal_section_unitary(ir, config.environment(), ir.data_sites[0], "mcm",
                              window=config.calibration.window)
    fidelity, _ = phase_gate_fidelity(M)
    return [
        within("microwave_pulses", counts["microwave_pulses"], 246, abs_tol=2),
        within("readout_pulses", counts["readout_pulses"], 230, abs_tol=0),
        within("echoes", counts["echoes"], 8, abs_tol=0),
        within("repump_cycles", counts["repump_cycles"], 46, abs_tol=0),
        at_least("phase_gate_fidelity", fidelity, 0.9999),
    ]


@criterion(9, "readout-engine", "End-to-end statistical band", slow=True)
def check_statistical_band(config: RunConfig, seed: int, shots: int) -> List[SubCheck]:
    cal = calibrate(config)
    t2 = simulated_t2_star(config.environment(), cal.sigma_zeeman)
    noisy = config.updated(spam={"enabled": True})
    fid = ancilla_fidelities(noisy, shots, seed)
    retention = spam_experiments(noisy, shots, seed)
    contrast = ramsey_scan(config, calibration=cal).contrast

    def m(est) -> Measured:
        return Measured(est.value, est.sigma)

    dark, bright = correct_ancilla(m(fid["P1_D"]), m(fid["P2_B"]), m(retention["R_base"]),
                                   m(retention["R4prep"]), m(retention["R3prep"]), m(retention["R_BA"]))
    checks = [
        within("t2_star", t2, config.noise.si("t2_star"), rel_tol=0.05),
        in_band("P1_D", fid["P1_D"].value, 0.92, 0.97),
        in_band("P2_B", fid["P2_B"].value, 0.92, 0.97),
        in_band("ramsey_contrast", contrast, 0.88, 0.96),
    ]
    absent = occupation_image(config, shots, seed, present=0.0, column="mid-circuit")
    checks.append(at_most("absent.bright_fraction", absent.class_summary()[ABSENT]["bright_fraction"], 1e-3))
    base = ReadoutParams.from_config(config).with_(depump_probability=0.0)
    per_photon = base.trap_depth / (base.bright_rate * base.exposure)
    losses = [loss_fraction(base.with_(dff=k * per_photon), min(shots, 2_000), seed).value
              for k in (0.0, 1.0, 4.0)]
    checks.append(holds("loss.monotone_in_heating", losses == sorted(losses), losses))
    for name, corrected, truth in (("P_D_given_0", dark, fid["true_dark"]),
                                   ("P_B_given_1", bright, fid["true_bright"])):
        band = 2.0 * math.hypot(corrected.sigma, truth.sigma)
        checks.append(within(f"recovered.{name}", corrected.value, truth.value, abs_tol=band))
    return checks


def _fingerprint(config: RunConfig, seed: int) -> str:
    ir = build_mcm_sequence(config, "x")
    run = run_experiment(config, "x", shots=20, seed=seed, ir=ir)
    table = data_table(load_spam_inputs().data)
    blob = ir.to_json() + to_json(run.to_document()) + to_json(table.to_document())
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


@criterion(10, "cli-app", "Determinism")
def check_determinism(config: RunConfig, seed: int, shots: int) -> List[SubCheck]:
    first, second = _fingerprint(config, seed), _fingerprint(config, seed)
    return [holds("identical_artifacts", first == second, first[:16])]


CRITERIA.sort(key=lambda c: c.id)


def run_acceptance(config: RunConfig, only: Optional[Sequence[str]] = None,
                   seed: Optional[int] = None, shots: Optional[int] = None,
                   fast: bool = False) -> AcceptanceReport:
    """Run the selected criteria; ``only`` holds ids or module names (``spam`` matches spam-analytics)."""
    seed = config.execution.seed if seed is None else seed
    shots = STATISTICAL_SHOTS if shots is None else shots
    tokens = [t.strip() for t in only or () if t.strip()]
    rows = []
    for c in CRITERIA:
        row = CriterionResult(c.id, c.module, c.name)
        if tokens and not c.matches(tokens) or fast and c.slow:
            row.skipped = True
            rows.append(row)
            continue
        started = time.perf_counter()
        try:
            row.checks = c.fn(config, seed, shots)
        except (MCMError, ArithmeticError, ValueError, RuntimeError) as e:
            row.error = f"{type(e).__name__}: {e}"
            logger.error("criterion %d (%s) raised %s", c.id, c.name, row.error)
        logger.debug("criterion %d took %.2f s", c.id, time.perf_counter() - started)
        log = logger.info if row.status == PASS else logger.warning
        log("criterion %d %s: %s", c.id, c.name, row.status)
        rows.append(row)
    if tokens and all(r.skipped for r in rows):
        logger.warning("--only %s matched no criterion", ",".join(tokens))
    return AcceptanceReport(rows, seed)
