"""SPAM correction of data-qubit and ancilla fidelities.

All formulas are first order in the small error probabilities. Uncertainties
use the delta method; each result keeps its per-input contributions so that
averages can combine them either as independent or as shared inputs.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Annotated, Any, Callable, Dict, List, Mapping, Optional, Sequence, Tuple

from pydantic import AfterValidator, BaseModel, ConfigDict
from pydantic import ValidationError as PydanticValidationError

from .config import PRESETS_DIR, load_document, validation_diagnostics
from .errors import ConfigError, DomainError

logger = logging.getLogger(__name__)

DEFAULT_SPAM_INPUTS = PRESETS_DIR / "spam_inputs.yaml"
PROCESS_INPUTS = ("x", "-x", "y", "-y", "0", "1")
INPUT_NAMES = {
    "x": "(|0>+|1>)/sqrt2",
    "-x": "(|0>-|1>)/sqrt2",
    "y": "(|0>+i|1>)/sqrt2",
    "-y": "(|0>-i|1>)/sqrt2",
    "0": "|0>",
    "1": "|1>",
}


@dataclass(frozen=True)
class Measured:
    value: float
    sigma: float = 0.0

    def __post_init__(self):
        if self.sigma < 0:
            raise DomainError(f"uncertainty must be >= 0, got {self.sigma}")


@dataclass(frozen=True)
class CorrectedFidelity:
    """Value with 1-sigma uncertainty; ``contributions`` maps input name to
    d(value)/d(input) * sigma(input)."""

    value: float
    sigma: float
    formula: str
    contributions: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.sigma < 0:
            raise DomainError("uncertainty must be >= 0")

    @property
    def exceeds_one(self) -> bool:
        return self.value > 1.0

    def to_dict(self) -> Dict[str, Any]:
        doc = {"value": self.value, "sigma": self.sigma, "formula": self.formula}
        if self.exceeds_one:
            doc["flag"] = "exceeds_one"
        return doc


def _pair(value: Tuple[float, float]) -> Tuple[float, float]:
    v, s = value
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"probability {v} outside [0, 1]")
    if s < 0:
        raise ValueError(f"uncertainty {s} must be >= 0")
    return value


Pair = Annotated[Tuple[float, float], AfterValidator(_pair)]


class _Inputs(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    def measured(self, name: str) -> Measured:
        return Measured(*getattr(self, name))


class DataInputs(_Inputs):
    P_DB: Dict[str, Pair] = {}
    P_DB_min: Pair
    R3prep: Pair
    R4prep: Pair


class AncillaInputs(_Inputs):
    P1_D: Pair
    P2_B: Pair
    R_base: Pair
    R4prep: Pair
    R3prep: Pair
    R_BA: Pair


class SpamInputs(_Inputs):
    """Measured retention and detection probabilities of both contexts."""

    data: Optional[DataInputs] = None
    ancilla: Optional[AncillaInputs] = None


def parse_spam_inputs(data: Dict[str, Any]) -> SpamInputs:
    try:
        return SpamInputs.model_validate(data)
    except PydanticValidationError as e:
        diags = validation_diagnostics(e)
        first = diags[0] if diags else {"path": "", "message": str(e)}
        raise ConfigError(f"invalid SPAM inputs at '{first['path']}': {first['message']}",
                          diagnostics=diags) from None


def load_spam_inputs(path: Optional[str] = None) -> SpamInputs:
    """Inputs from a YAML/JSON file; the shipped measured dataset by default."""
    resolved = Path(path) if path else DEFAULT_SPAM_INPUTS
    if not resolved.exists():
        raise ConfigError(f"SPAM input file {resolved} does not exist")
    return parse_spam_inputs(load_document(resolved))


# --- delta method ------------------------------------------------------------

def _propagate(fn: Callable[..., float], inputs: Mapping[str, Measured],
               formula: str) -> CorrectedFidelity:
    """Value and first-order uncertainty of ``fn(**values)`` with independent inputs."""
    values = {k: m.value for k, m in inputs.items()}
    value = fn(**values)
    contributions = {}
    for name, m in inputs.items():
        if m.sigma == 0:
            contributions[name] = 0.0
            continue
        h = max(1e-7, 1e-6 * abs(m.value))
        hi = dict(values, **{name: m.value + h})
        lo = dict(values, **{name: m.value - h})
        contributions[name] = (fn(**hi) - fn(**lo)) / (2.0 * h) * m.sigma
    sigma = math.sqrt(sum(c * c for c in contributions.values()))
    result = CorrectedFidelity(value, sigma, formula, contributions)
    if result.exceeds_one:
        logger.warning("%s = %.4f exceeds 1 after correction (lower bound, not clamped)", formula, value)
    return result


# --- data qubits -------------------------------------------------------------

def correct_data_fidelity(P_DB: Measured, P_DB_min: Measured, R3prep: Measured, R4prep: Measured,
                          label: str = "P_DB") -> CorrectedFidelity:
    """Lower bound (P_DB - P_DB_min) / (R3prep - R4prep) on P(|0>out | |0>in)."""
    if R3prep.value - R4prep.value <= 0:
        raise DomainError(f"R3prep ({R3prep.value}) must exceed R4prep ({R4prep.value})")

    def fn(p_db, p_min, r3, r4):
        return (p_db - p_min) / (r3 - r4)

    result = _propagate(fn, {"p_db": P_DB, "p_min": P_DB_min, "r3": R3prep, "r4": R4prep},
                        "(P_DB - P_DB_min) / (R3prep - R4prep)")
    names = {"p_db": label, "p_min": "P_DB_min", "r3": "R3prep", "r4": "R4prep"}
    return CorrectedFidelity(result.value, result.sigma, result.formula,
                             {names[k]: v for k, v in result.contributions.items()})


def average_process_fidelity(fidelities: Sequence[CorrectedFidelity],
                             correlated: bool = True) -> CorrectedFidelity:
    """Mean over the six cardinal inputs.

    Correlated (default): contributions of inputs sharing a name (P_DB_min,
    R3prep, R4prep) add linearly before the quadrature sum. Independent:
    sigma = sqrt(sum sigma_i^2) / 6.
    """
    if len(fidelities) != len(PROCESS_INPUTS):
        raise DomainError(f"average process fidelity needs {len(PROCESS_INPUTS)} inputs, got {len(fidelities)}")
    n = len(fidelities)
    value = sum(f.value for f in fidelities) / n
    if correlated:
        shared: Dict[str, float] = {}
        for f in fidelities:
            for name, c in f.contributions.items():
                shared[name] = shared.get(name, 0.0) + c / n
        sigma = math.sqrt(sum(c * c for c in shared.values()))
        contributions = shared
    else:
        sigma = math.sqrt(sum(f.sigma ** 2 for f in fidelities)) / n
        contributions = {}
    tag = "mean(" + fidelities[0].formula + ")"
    return CorrectedFidelity(value, sigma, tag, contributions)


@dataclass
class DataTable:
    rows: List[Dict[str, Any]]
    raw_average: CorrectedFidelity
    corrected_average: CorrectedFidelity

    def to_document(self) -> Dict[str, Any]:
        return {"rows": self.rows, "average": {"raw": self.raw_average.to_dict(),
                                               "corrected": self.corrected_average.to_dict()}}

    def csv_rows(self) -> List[List[Any]]:
        out: List[List[Any]] = [["input", "raw", "raw_sigma", "corrected", "corrected_sigma", "flag"]]
        for row in self.rows:
            out.append([row["input"], row["raw"]["value"], row["raw"]["sigma"],
                        row["corrected"]["value"], row["corrected"]["sigma"],
                        row["corrected"].get("flag", "")])
        out.append(["Average", self.raw_average.value, self.raw_average.sigma,
                    self.corrected_average.value, self.corrected_average.sigma,
                    self.corrected_average.to_dict().get("flag", "")])
        return out


def data_table(inputs: DataInputs, correlated: bool = True) -> DataTable:
    """Raw and corrected fidelity per input, in the layout of the published table."""
    p_min, r3, r4 = inputs.measured("P_DB_min"), inputs.measured("R3prep"), inputs.measured("R4prep")
    rows, raws, corrected = [], [], []
    for label in PROCESS_INPUTS:
        if label not in inputs.P_DB:
            continue
        raw_m = Measured(*inputs.P_DB[label])
        raw = CorrectedFidelity(raw_m.value, raw_m.sigma, "P_DB", {f"P_DB[{label}]": raw_m.sigma})
        fixed = correct_data_fidelity(raw_m, p_min, r3, r4, label=f"P_DB[{label}]")
        raws.append(raw)
        corrected.append(fixed)
        rows.append({"input": INPUT_NAMES[label], "key": label, "raw": raw.to_dict(),
                     "corrected": fixed.to_dict()})
    return DataTable(rows, average_process_fidelity(raws, correlated),
                     average_process_fidelity(corrected, correlated))


# --- ancilla -----------------------------------------------------------------

def correct_ancilla(P1_D: Measured, P2_B: Measured, R_base: Measured, R4prep: Measured,
                    R3prep: Measured, R_BA: Measured,
                    propagation: str = "joint") -> Tuple[CorrectedFidelity, CorrectedFidelity]:
    """Preparation-corrected P(D | |0>) and P(B | |1>).

    ``joint`` (default) takes one Jacobian over the six measured inputs, so
    R_base, R3prep, R4prep and R_BA each enter the variance once. ``staged``
    first forms eps_l,pre = (1 - R_base)/2 and
    eps_prep = R4prep - R3prep + R_base - R_BA, then treats every occurrence
    of them in the final ratio as an independent term; this double counts the
    shared inputs and reproduces the larger quoted uncertainties.
    """
    denominator = 0.5 - R4prep.value + R3prep.value - R_base.value / 2.0 + R_BA.value
    if denominator <= 0:
        raise DomainError(f"ancilla correction denominator {denominator:.4g} <= 0")

    if propagation == "joint":
        raw = {"P1_D": P1_D, "P2_B": P2_B, "R_base": R_base, "R4prep": R4prep, "R3prep": R3prep,
               "R_BA": R_BA}

        def dark(P1_D, P2_B, R_base, R4prep, R3prep, R_BA):
            return (P1_D - 0.5 * (1.0 - R_base)) / (0.5 - R4prep + R3prep - R_base / 2.0 + R_BA)

        def bright(P1_D, P2_B, R_base, R4prep, R3prep, R_BA):
            return (P2_B - R4prep + R3prep - R_base + R_BA) / (0.5 - R4prep + R3prep - R_base / 2.0 + R_BA)

        return (_propagate(dark, raw, "(P1_D - eps_l,pre) / (1 - eps_l,pre - eps_prep)"),
                _propagate(bright, raw, "(P2_B - eps_prep) / (1 - eps_l,pre - eps_prep)"))
    if propagation != "staged":
        raise DomainError(f"unknown propagation '{propagation}' (joint or staged)")

    terms = decompose_ancilla(R_base, R4prep, R3prep, R_BA)
    eps_l, eps_p = terms["eps_l_pre"], terms["eps_prep"]
    staged = {"p": P1_D, "el": eps_l, "el2": eps_l, "ep": eps_p}

    def dark_staged(p, el, el2, ep):
        return (p - el) / (1.0 - el2 - ep)

    def bright_staged(p, el, el2, ep):
        return (p - el2) / (1.0 - el - ep)

    result_dark = _propagate(dark_staged, staged, "(P1_D - eps_l,pre) / (1 - eps_l,pre - eps_prep)")
    staged_b = {"p": P2_B, "el": eps_l, "el2": eps_p, "ep": eps_p}
    result_bright = _propagate(bright_staged, staged_b, "(P2_B - eps_prep) / (1 - eps_l,pre - eps_prep)")
    return result_dark, result_bright


def decompose_ancilla(R_base: Measured, R4prep: Measured, R3prep: Measured,
                      R_BA: Measured) -> Dict[str, Measured]:
    eps_l = Measured((1.0 - R_base.value) / 2.0, R_base.sigma / 2.0)
    eps_prep = Measured(R4prep.value - R3prep.value + R_base.value - R_BA.value,
                        math.sqrt(R4prep.sigma ** 2 + R3prep.sigma ** 2 + R_base.sigma ** 2 + R_BA.sigma ** 2))
    return {"eps_l_pre": eps_l, "eps_prep": eps_prep}


def decompose_error_budget(inputs: SpamInputs) -> Dict[str, Dict[str, Any]]:
    """Named first-order error terms with their provenance."""
    out: Dict[str, Dict[str, Any]] = {}

    def put(name: str, m: Measured, note: str):
        out[name] = {"value": m.value, "sigma": m.sigma, "note": note}

    if inputs.ancilla is not None:
        a = inputs.ancilla
        rb, r3, r4, rba = (a.measured(k) for k in ("R_base", "R3prep", "R4prep", "R_BA"))
        terms = decompose_ancilla(rb, r4, r3, rba)
        put("eps_l_pre", terms["eps_l_pre"], "(1 - R_base) / 2, assuming eps_l,pre = eps_l,post")
        put("eps_l_post", terms["eps_l_pre"], "equal to eps_l,pre by assumption")
        put("eps_prep", terms["eps_prep"], "R4prep - R3prep + R_base - R_BA")
        put("eps_3prep", Measured(r4.value - rba.value, math.hypot(r4.sigma, rba.sigma)),
            "R4prep - R_BA")
        put("eps_4prep", Measured(rb.value - r3.value, math.hypot(rb.sigma, r3.sigma)),
            "R_base - R3prep")
        put("eps_BA", rba, "R_BA = eps_BA (1 - eps_l,pre - eps_l,post) ~ eps_BA")
    if inputs.data is not None:
        d = inputs.data
        p_min = d.measured("P_DB_min")
        eps_ba = out.get("eps_BA")
        ba = Measured(eps_ba["value"], eps_ba["sigma"]) if eps_ba else Measured(0.0)
        put("eps_sh3_bound", Measured(p_min.value - ba.value, math.hypot(p_min.sigma, ba.sigma)),
            "P_DB_min - eps_BA (conservative over-estimate)")
        put("denominator_data", Measured(d.R3prep[0] - d.R4prep[0], math.hypot(d.R3prep[1], d.R4prep[1])),
            "R3prep - R4prep = 1 - eps_l,pre - eps_l,post - eps_prep - eps_BA")
    return out


def correct_all(inputs: SpamInputs, correlated: bool = True,
                propagation: str = "joint") -> Dict[str, Any]:
    """Full report: data table, ancilla correction and error terms."""
    report: Dict[str, Any] = {}
    if inputs.data is not None:
        report["data"] = data_table(inputs.data, correlated).to_document()
    if inputs.ancilla is not None:
        a = inputs.ancilla
        dark, bright = correct_ancilla(*(a.measured(k) for k in
                                         ("P1_D", "P2_B", "R_base", "R4prep", "R3prep", "R_BA")),
                                       propagation=propagation)
        report["ancilla"] = {"P_D_given_0": dark.to_dict(), "P_B_given_1": bright.to_dict(),
                             "propagation": propagation}
    report["error_terms"] = decompose_error_budget(inputs)
    report["propagation"] = {"average": "correlated" if correlated else "independent",
                             "ancilla": propagation}
    return report
