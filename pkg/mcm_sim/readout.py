"""Monte-Carlo fluorescence readout and the experiments built on it.

A shot walks every simulated site through the compiled schedule. Microwave
pulses are coherent; each readout-light segment projects the atom onto f=4
(bright, cycling on |4,4>) or f=3 (dark, coherence inside f=3 kept) and then
runs an event-driven scattering process: exponential waiting times for
depumping and off-resonant brightening, Poisson photon numbers in between.
Heating is counted per scattered photon and the atom is lost once its energy
exceeds the site depth.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .atomic_model import (
    F4_INDICES,
    STRETCHED,
    FieldEnvironment,
    LevelState,
    ScatterParams,
    recoil_energy,
    scattering_rate_bright,
    scattering_rate_offresonant,
)
from .calibration import Calibration, calibrate, noise_model
from .config import RunConfig
from .constants import KB
from .errors import DomainError, FitError
from .executor import run_site
from .pulse_engine import (
    AtomState,
    NoiseDeviate,
    NoiseModel,
    Propagator,
    gauss_hermite,
    sample_noise,
    shot_rng,
)
from .sequence import (
    Blowaway,
    CameraGate,
    SequenceIR,
    build_dwell_sequence,
    build_mcm_sequence,
)

logger = logging.getLogger(__name__)

BRIGHT, DARK, ABSENT = "bright", "dark", "absent"
CLASSES = (BRIGHT, DARK, ABSENT)

# prep-error landing states: wrong f=3 sublevel, or left behind in f=4
PREP_ERROR_F3 = LevelState(3, 1)
PREP_ERROR_F4 = LevelState(4, 1)


# --- parameters --------------------------------------------------------------

@dataclass(frozen=True)
class ReadoutParams:
    """Light, heating and camera parameters of one readout column.

    Energies and depths are in kelvin (E / k_B).
    """

    scatter: ScatterParams
    efficiency: float = 0.005
    exposure: float = 4e-3
    depump_probability: float = 1e-3
    depump_weights: Tuple[Tuple[int, float], ...] = ((3, 0.75), (2, 0.2), (1, 0.046), (0, 0.003), (-1, 0.001))
    trap_depth: float = 1.8e-3
    recoil: float = 0.0
    dff: float = 0.0
    heating_mode: str = "deterministic"
    loss_enabled: bool = True
    initial_temperature: float = 10e-6
    background_mean: float = 1.0
    camera_sigma: float = 2.5
    threshold_sigmas: float = 6.4
    threshold: Optional[float] = None

    def __post_init__(self):
        if not 0.0 <= self.efficiency <= 1.0:
            raise DomainError(f"collection efficiency {self.efficiency} outside [0, 1]")
        if self.exposure < 0 or self.background_mean < 0 or self.camera_sigma < 0:
            raise DomainError("exposure, background and camera noise must be >= 0")
        if self.recoil < 0 or self.dff < 0:
            raise DomainError("heating per photon must be >= 0")
        if self.heating_mode not in ("deterministic", "stochastic"):
            raise DomainError(f"unknown heating mode '{self.heating_mode}'")

    @classmethod
    def from_config(cls, config: RunConfig, column: str = "mid-circuit") -> "ReadoutParams":
        r = config.readout
        if column == "occupation":
            exposure, depth = config.occupation.si("exposure"), config.occupation.si("trap_depth")
        else:
            exposure, depth = r.si("exposure"), r.si("trap_depth")
        recoil = 2.0 * recoil_energy() / KB if r.recoil_heating else 0.0
        return cls(
            scatter=config.scatter_params(column),
            efficiency=r.collection_efficiency,
            exposure=exposure,
            depump_probability=r.depump_probability,
            depump_weights=tuple(sorted(r.depump_weights.items(), reverse=True)),
            trap_depth=depth,
            recoil=recoil,
            dff=r.si("dff_heating"),
            heating_mode=r.heating_mode,
            loss_enabled=r.loss_enabled,
            initial_temperature=r.si("initial_temperature"),
            background_mean=r.background_mean,
            camera_sigma=r.camera_sigma,
            threshold_sigmas=r.threshold_sigmas,
            threshold=r.threshold,
        )

    def with_(self, **changes) -> "ReadoutParams":
        return replace(self, **changes)

    @property
    def heating_per_photon(self) -> float:
        return self.recoil + self.dff

    @property
    def initial_energy(self) -> float:
        """Mean thermal energy 3 k_B T of a 3-D harmonic trap, in kelvin."""
        return 3.0 * self.initial_temperature

    @property
    def bright_rate(self) -> float:
        return scattering_rate_bright(self.scatter)

    @property
    def dark_rate(self) -> float:
        return scattering_rate_offresonant(self.scatter)

    @property
    def dark_sigma(self) -> float:
        return math.sqrt(self.background_mean + self.camera_sigma ** 2)

    @property
    def threshold_value(self) -> float:
        if self.threshold is not None:
            return self.threshold
        return self.background_mean + self.threshold_sigmas * self.dark_sigma

    def depump_levels(self) -> Tuple[List[LevelState], np.ndarray]:
        levels = [LevelState(3, m) for m, _ in self.depump_weights]
        weights = np.array([w for _, w in self.depump_weights], dtype=float)
        return levels, weights / weights.sum()


# --- light model -------------------------------------------------------------

class LightModel:
    """Scattering, depumping, heating and loss of one atom during readout light.

    One instance per (shot, site); it is the light callback of ``run_site``
    and accumulates the scattered-photon count.
    """

    def __init__(self, params: ReadoutParams, rng: np.random.Generator, depth: Optional[float] = None):
        self.params = params
        self.rng = rng
        self.depth = params.trap_depth if depth is None else depth
        self.photons = 0
        self.loss_time: Optional[float] = None
        self.initial_class: Optional[str] = None
        self._levels, self._weights = params.depump_levels()

    def __call__(self, site: int, state: AtomState, event) -> AtomState:
        if state.lost:
            if self.initial_class is None:
                self.initial_class = ABSENT
            return state
        scatter: ScatterParams = event.payload.scatter
        duration = event.duration * 1e-9
        bright = self.rng.random() < state.manifold_population(4)
        if self.initial_class is None:
            self.initial_class = BRIGHT if bright else DARK
        state = self._project(state, bright)

        r_bright = scattering_rate_bright(scatter)
        r_dark = scattering_rate_offresonant(scatter)
        elapsed = 0.0
        while elapsed < duration:
            remaining = duration - elapsed
            if bright:
                r_dp = r_bright * self.params.depump_probability
                t_dp = self.rng.exponential(1.0 / r_dp) if r_dp > 0 else math.inf
                tau = min(t_dp, remaining)
                n = int(self.rng.poisson(r_bright * tau)) if r_bright > 0 else 0
                state, fraction = self._heat(state, n)
                if state.lost:
                    self.loss_time = event.start_s + elapsed + fraction * tau
                    return state
                elapsed += tau
                if t_dp < remaining:
                    level = self._levels[int(self.rng.choice(len(self._levels), p=self._weights))]
                    state = AtomState.from_level(level, state.e_mot)
                    bright = False
            else:
                t_up = self.rng.exponential(1.0 / r_dark) if r_dark > 0 else math.inf
                if t_up >= remaining:
                    break
                elapsed += t_up
                state = AtomState.from_level(STRETCHED, state.e_mot)
                bright = True
        return state

    @staticmethod
    def _project(state: AtomState, bright: bool) -> AtomState:
        if bright:
            return AtomState.from_level(STRETCHED, state.e_mot)
        amp = state.amp.copy()
        amp[list(F4_INDICES)] = 0.0
        norm = np.linalg.norm(amp)
        if norm == 0:
            # projection onto an empty manifold; only reachable through rounding
            amp[LevelState(3, 0).index] = 1.0
            norm = 1.0
        return AtomState(amp / norm, False, state.e_mot)

    def _heat(self, state: AtomState, n: int) -> Tuple[AtomState, float]:
        """Add ``n`` photons' heating; returns the state and, if lost, the fraction
        of the interval elapsed at the moment of loss."""
        per = self.params.heating_per_photon
        if n == 0:
            return state, 0.0
        if self.params.heating_mode == "stochastic" and per > 0:
            kicks = np.cumsum(self.rng.exponential(per, n))
        else:
            kicks = None
        if not self.params.loss_enabled or per == 0:
            gained = n * per if kicks is None else float(kicks[-1])
            self.photons += n
            return AtomState(state.amp, False, state.e_mot + gained), 0.0

        headroom = self.depth - state.e_mot
        if kicks is None:
            k_loss = max(int(math.floor(headroom / per)) + 1, 1)
        else:
            k_loss = int(np.searchsorted(kicks, headroom, side="right")) + 1
        if n < k_loss:
            gained = n * per if kicks is None else float(kicks[-1])
            self.photons += n
            return AtomState(state.amp, False, state.e_mot + gained), 0.0
        # the k-th of n uniform arrival times
        fraction = float(self.rng.beta(k_loss, n - k_loss + 1))
        gained = k_loss * per if kicks is None else float(kicks[k_loss - 1])
        self.photons += k_loss
        return AtomState(state.amp, True, state.e_mot + gained), fraction


def camera_count(photons: int, params: ReadoutParams, rng: np.random.Generator) -> int:
    """Photoelectrons: Binomial(photons, eta) + Poisson background + Gaussian read noise."""
    signal = rng.binomial(photons, params.efficiency) if photons > 0 else 0
    background = rng.poisson(params.background_mean) if params.background_mean > 0 else 0
    noise = rng.normal(0.0, params.camera_sigma) if params.camera_sigma > 0 else 0.0
    return max(0, int(round(signal + background + noise)))


def classify(count: float, threshold: float) -> str:
    return BRIGHT if count > threshold else DARK


# --- records and histograms --------------------------------------------------

@dataclass
class ReadoutRecord:
    count: int
    true_class: str
    survived: bool
    loss_time: Optional[float] = None
    photons: int = 0
    energy: float = 0.0

    def __post_init__(self):
        if self.count < 0:
            raise DomainError("photoelectron count must be >= 0")


@dataclass(frozen=True)
class Estimate:
    """Binomial fraction with its 1-sigma error."""

    value: float
    sigma: float
    n: int

    @classmethod
    def binomial(cls, hits: int, n: int) -> "Estimate":
        if n <= 0:
            raise DomainError("need at least one trial")
        p = hits / n
        return cls(p, math.sqrt(max(p * (1.0 - p), 0.0) / n), n)

    def to_dict(self) -> Dict[str, float]:
        return {"value": self.value, "sigma": self.sigma, "n": self.n}


@dataclass
class Histogram:
    counts: np.ndarray
    classes: List[str]
    threshold: float

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=int)
        if len(self.classes) != len(self.counts):
            raise DomainError("one class per count is required")
        if (self.counts < 0).any():
            raise DomainError("counts must be >= 0")

    @classmethod
    def from_records(cls, records: Sequence[ReadoutRecord], threshold: float) -> "Histogram":
        return cls(np.array([r.count for r in records], dtype=int), [r.true_class for r in records], threshold)

    def merged(self, other: "Histogram") -> "Histogram":
        return Histogram(np.concatenate([self.counts, other.counts]), self.classes + other.classes,
                         self.threshold)

    def binned(self) -> Tuple[np.ndarray, np.ndarray]:
        """Unit-width bins from 0 to the largest count; returns (left edges, counts)."""
        top = int(self.counts.max()) + 1 if self.counts.size else 1
        values, edges = np.histogram(self.counts, bins=np.arange(0, top + 1))
        return edges[:-1], values

    def _of(self, cls_name: str) -> np.ndarray:
        mask = np.array([c == cls_name for c in self.classes], dtype=bool)
        return self.counts[mask]

    def class_summary(self) -> Dict[str, Dict[str, float]]:
        summary = {}
        for name in CLASSES:
            values = self._of(name)
            if values.size:
                summary[name] = {"n": int(values.size), "mean": float(values.mean()),
                                 "std": float(values.std(ddof=1)) if values.size > 1 else 0.0,
                                 "bright_fraction": float((values > self.threshold).mean())}
        return summary

    def _dark_like(self) -> np.ndarray:
        return np.concatenate([self._of(DARK), self._of(ABSENT)])

    def threshold_sigmas(self) -> float:
        """Distance of the threshold from the dark peak in dark-peak sigma."""
        dark = self._dark_like()
        if dark.size < 2 or dark.std(ddof=1) == 0:
            return math.nan
        return float((self.threshold - dark.mean()) / dark.std(ddof=1))

    def separation(self) -> float:
        """(mu_bright - mu_dark) / (sigma_bright + sigma_dark)."""
        bright, dark = self._of(BRIGHT), self._dark_like()
        if bright.size < 2 or dark.size < 2:
            return math.nan
        spread = bright.std(ddof=1) + dark.std(ddof=1)
        return float((bright.mean() - dark.mean()) / spread) if spread > 0 else math.inf

    def sweep(self, thresholds: Optional[Sequence[float]] = None) -> List[Tuple[float, float]]:
        """Mean misclassification (P(B|dark) + P(D|bright)) / 2 per threshold."""
        bright, dark = self._of(BRIGHT), self._dark_like()
        if not bright.size or not dark.size:
            raise DomainError("threshold sweep needs both bright and dark shots")
        if thresholds is None:
            thresholds = np.arange(0, int(self.counts.max()) + 1) + 0.5
        rows = []
        for t in thresholds:
            error = 0.5 * ((dark > t).mean() + (bright <= t).mean())
            rows.append((float(t), float(error)))
        return rows

    def optimal_threshold(self) -> Tuple[float, float]:
        rows = self.sweep()
        best = min(rows, key=lambda r: (r[1], r[0]))
        return best

    def to_csv_rows(self) -> List[Tuple[int, int]]:
        left, values = self.binned()
        return [(int(a), int(b)) for a, b in zip(left, values)]

    def to_document(self) -> Dict[str, Any]:
        doc: Dict[str, Any] = {
            "shots": int(self.counts.size),
            "threshold": self.threshold,
            "classes": self.class_summary(),
            "threshold_sigmas": self.threshold_sigmas(),
            "separation": self.separation(),
        }
        if self._of(BRIGHT).size and self._dark_like().size:
            t, err = self.optimal_threshold()
            doc["optimal_threshold"] = {"threshold": t, "misclassification": err}
        return doc


# --- shots -------------------------------------------------------------------

@dataclass
class SiteResult:
    record: ReadoutRecord
    retained: Optional[bool]      # after blowaway and final occupation image
    clean: bool                   # no injected SPAM error
    state: AtomState


def _site_depth(ir: SequenceIR, site: int, params: ReadoutParams) -> float:
    if ir.trap_plan is None or site == ir.ancilla:
        return params.trap_depth
    return ir.trap_plan.site_depth(site, 1.0)


def _blowaway_error(ir: SequenceIR) -> float:
    events = ir.of_type(Blowaway)
    return events[0].payload.error if events else 0.0


def _run_site_shot(ir: SequenceIR, site: int, params: ReadoutParams, propagator: Propagator,
                   rng: np.random.Generator, spam=None, start: Optional[AtomState] = None,
                   sections: Optional[Sequence[str]] = None, light: bool = True) -> SiteResult:
    state = start.copy() if start is not None else AtomState.from_level(STRETCHED, params.initial_energy)
    clean = True
    model = LightModel(params, rng, _site_depth(ir, site, params))
    handler = model if light else None
    order = [s for s in ("prep", "input", "mcm", "output", "blowaway", "reinit")
             if sections is None or s in sections]

    if spam is not None and rng.random() < spam.loss_pre:
        state = AtomState(state.amp, True, state.e_mot)
        clean = False

    outcome = None
    if "prep" in order:
        outcome = run_site(ir, site, state, propagator, handler, rng, {"prep"})
        state = outcome.state
    if spam is not None and "prep" in order and not state.lost:
        u = rng.random()
        if u < spam.prep_f3:
            state, clean = AtomState.from_level(PREP_ERROR_F3, state.e_mot), False
        elif u < spam.prep_f3 + spam.prep_f4:
            state, clean = AtomState.from_level(PREP_ERROR_F4, state.e_mot), False
    rest = [s for s in order if s != "prep"]
    if rest:
        outcome = run_site(ir, site, state, propagator, handler, rng, set(rest))
        state = outcome.state

    retained: Optional[bool] = None
    if outcome is not None and outcome.reached_blowaway:
        if state.lost:
            retained = False
        elif rng.random() < state.manifold_population(3):
            retained = True
        else:
            retained = rng.random() < _blowaway_error(ir)
        if retained and spam is not None and rng.random() < spam.loss_post:
            retained = False
    if outcome is not None and outcome.scattered:
        clean = False

    has_camera = bool(ir.of_type(CameraGate))
    count = camera_count(model.photons, params, rng) if has_camera else 0
    record = ReadoutRecord(count, model.initial_class or (ABSENT if state.lost else DARK),
                           not state.lost, model.loss_time, model.photons, state.e_mot)
    return SiteResult(record, retained, clean, state)


def simulate_shot(atom: AtomState, ir: SequenceIR, params: ReadoutParams, rng: np.random.Generator,
                  site: Optional[int] = None, propagator: Optional[Propagator] = None,
                  sections: Optional[Sequence[str]] = None) -> ReadoutRecord:
    """Readout record of one site starting from ``atom`` (default: the ancilla)."""
    site = ir.ancilla if site is None else site
    propagator = propagator or Propagator(FieldEnvironment())
    if sections is None:
        sections = sorted({e.section for e in ir.events})
    return _run_site_shot(ir, site, params, propagator, rng, start=atom, sections=sections).record


# --- experiments -------------------------------------------------------------

@dataclass
class ExperimentResult:
    input: str
    histogram: Histogram
    records: List[ReadoutRecord]
    data_retained: np.ndarray          # shots x data sites
    clean: np.ndarray                  # ancilla free of injected SPAM errors
    seed: int
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def shots(self) -> int:
        return len(self.records)

    def ancilla_fraction(self, outcome: str, clean_only: bool = False) -> Estimate:
        labels = np.array([classify(r.count, self.histogram.threshold) for r in self.records])
        mask = self.clean if clean_only else np.ones(len(labels), dtype=bool)
        n = int(mask.sum())
        if n == 0:
            return Estimate(math.nan, math.nan, 0)
        return Estimate.binomial(int((labels[mask] == outcome).sum()), n)

    def data_retention(self) -> Estimate:
        flat = self.data_retained.reshape(-1)
        return Estimate.binomial(int(flat.sum()), flat.size)

    def to_document(self) -> Dict[str, Any]:
        return {
            "input": self.input,
            "shots": self.shots,
            "seed": self.seed,
            "ancilla_bright": self.ancilla_fraction(BRIGHT).to_dict(),
            "ancilla_dark": self.ancilla_fraction(DARK).to_dict(),
            "data_retention": self.data_retention().to_dict() if self.data_retained.size else None,
            "histogram": self.histogram.to_document(),
            "loss_fraction": float(np.mean([not r.survived for r in self.records])),
            "metadata": self.metadata,
        }


def run_experiment(config: RunConfig, input_label: str = "0", shots: Optional[int] = None,
                   seed: Optional[int] = None, ir: Optional[SequenceIR] = None,
                   params: Optional[ReadoutParams] = None, noise: Optional[NoiseModel] = None,
                   spam: Optional[bool] = None, start: Optional[AtomState] = None,
                   sections: Optional[Sequence[str]] = None) -> ExperimentResult:
    """Run ``shots`` independent shots of the compiled circuit.

    The ancilla record comes from the camera; data sites report retention
    after the blowaway. Noise defaults to the calibrated model of ``config``.
    """
    shots = config.execution.shots if shots is None else shots
    if shots < 1:
        raise DomainError("need at least one shot")
    seed = config.execution.seed if seed is None else seed
    if ir is None:
        ir = build_mcm_sequence(config, input_label)
    params = params or ReadoutParams.from_config(config)
    noise = noise_model(config, seed=seed) if noise is None else noise
    use_spam = config.spam.enabled if spam is None else spam
    spam_block = config.spam if use_spam else None
    env = config.environment()
    data_sites = ir.data_sites[:config.sequence.data_sites_simulated]

    records: List[ReadoutRecord] = []
    retained = np.zeros((shots, len(data_sites)), dtype=bool)
    clean = np.zeros(shots, dtype=bool)
    for shot in range(shots):
        propagator = Propagator(env, sample_noise(noise, shot), config.calibration.window)
        rng = shot_rng(seed, shot)
        result = _run_site_shot(ir, ir.ancilla, params, propagator, rng, spam_block, start, sections)
        records.append(result.record)
        clean[shot] = result.clean
        for j, site in enumerate(data_sites):
            data = _run_site_shot(ir, site, params, propagator, rng, spam_block, start, sections)
            retained[shot, j] = bool(data.retained)
    histogram = Histogram.from_records(records, params.threshold_value)
    label = ir.metadata.get("input", input_label)
    logger.debug("input %s: %d shots, histogram %s", label, shots, histogram.class_summary())
    return ExperimentResult(str(label), histogram, records, retained, clean, seed,
                            {"noise": {"sigma_zeeman": noise.sigma_zeeman,
                                       "sigma_amplitude": noise.sigma_amplitude},
                             "spam": use_spam})


def ancilla_fidelities(config: RunConfig, shots: Optional[int] = None,
                       seed: Optional[int] = None, spam: Optional[bool] = None) -> Dict[str, Any]:
    """P(D | ancilla |0>) and P(B | ancilla |1>) with binomial errors."""
    zero = run_experiment(config, "0", shots, seed, spam=spam)
    one = run_experiment(config, "1", shots, seed, spam=spam)
    hist = zero.histogram.merged(one.histogram)
    return {
        "P1_D": zero.ancilla_fraction(DARK),
        "P2_B": one.ancilla_fraction(BRIGHT),
        "true_dark": zero.ancilla_fraction(DARK, clean_only=True),
        "true_bright": one.ancilla_fraction(BRIGHT, clean_only=True),
        "histogram": hist,
        "runs": (zero, one),
    }


def spam_experiments(config: RunConfig, shots: Optional[int] = None,
                     seed: Optional[int] = None) -> Dict[str, Estimate]:
    """Retention experiments feeding the SPAM correction.

    R_base: preparation and two occupation images. R3prep: preparation then
    blowaway. R4prep: preparation, an ideal clock pi pulse, blowaway. R_BA:
    |4,4> straight into the blowaway.
    """
    shots = config.execution.shots if shots is None else shots
    seed = config.execution.seed if seed is None else seed
    quiet = NoiseModel()
    results: Dict[str, Estimate] = {}

    prep_only = build_mcm_sequence(config, "0", output=None, include_mcm=False)
    with_pi = build_mcm_sequence(config, "1", output=None, include_mcm=False)
    results["R_base"] = _retention(config, prep_only, shots, seed, quiet, ("prep",), blowaway=False)
    results["R3prep"] = _retention(config, prep_only, shots, seed, quiet, None)
    results["R4prep"] = _retention(config, with_pi, shots, seed, quiet, None)
    results["R_BA"] = _retention(config, prep_only, shots, seed, quiet, ("blowaway",))
    return results


def _retention(config: RunConfig, ir: SequenceIR, shots: int, seed: int, noise: NoiseModel,
               sections: Optional[Sequence[str]], blowaway: bool = True) -> Estimate:
    params = ReadoutParams.from_config(config)
    spam = config.spam if config.spam.enabled else None
    env = config.environment()
    site = ir.data_sites[0]
    kept = 0
    for shot in range(shots):
        propagator = Propagator(env, sample_noise(noise, shot), config.calibration.window)
        rng = shot_rng(seed, shot)
        result = _run_site_shot(ir, site, params, propagator, rng, spam, sections=sections, light=False)
        if blowaway:
            kept += bool(result.retained)
        else:
            alive = not result.state.lost
            if alive and spam is not None and rng.random() < spam.loss_post:
                alive = False
            kept += alive
    return Estimate.binomial(kept, shots)


def process_experiment(config: RunConfig, shots: Optional[int] = None, seed: Optional[int] = None,
                       inputs: Sequence[str] = ("x", "-x", "y", "-y", "0", "1")) -> Dict[str, Estimate]:
    """Raw P_DB per cardinal input with the output rotation undoing the input."""
    return {label: run_experiment(config, label, shots, seed).data_retention() for label in inputs}


def occupation_image(config: RunConfig, shots: Optional[int] = None, seed: Optional[int] = None,
                     present: float = 1.0, column: str = "occupation") -> Histogram:
    """Histogram of an occupation image; ``present`` is the loading probability.

    ``column="mid-circuit"`` images with the readout light and threshold instead.
    """
    params = ReadoutParams.from_config(config, column)
    ir = build_dwell_sequence(params.scatter, params.exposure)
    shots = config.execution.shots if shots is None else shots
    seed = config.execution.seed if seed is None else seed
    propagator = Propagator(config.environment())
    records = []
    for shot in range(shots):
        rng = shot_rng(seed, shot)
        atom = AtomState.from_level(STRETCHED, params.initial_energy)
        if rng.random() >= present:
            atom = AtomState(atom.amp, True, atom.e_mot)
        records.append(_run_site_shot(ir, ir.ancilla, params, propagator, rng, start=atom,
                                      sections=("mcm",)).record)
    return Histogram.from_records(records, params.threshold_value)


def loss_fraction(params: ReadoutParams, shots: int, seed: int) -> Estimate:
    """Fraction of bright atoms lost during one continuous dwell of ``params``."""
    if shots < 1:
        raise DomainError("need at least one shot")
    ir = build_dwell_sequence(params.scatter, params.exposure)
    propagator = Propagator(FieldEnvironment())
    lost = 0
    for shot in range(shots):
        atom = AtomState.from_level(STRETCHED, params.initial_energy)
        record = simulate_shot(atom, ir, params, shot_rng(seed, shot), propagator=propagator)
        lost += not record.survived
    return Estimate.binomial(lost, shots)


# --- Ramsey ------------------------------------------------------------------

RAMSEY_MIN_POINTS = 8


@dataclass(frozen=True)
class RamseyFit:
    amplitude: float
    offset: float
    phase: float
    residual: float
    phases: Tuple[float, ...]
    values: Tuple[float, ...]

    @property
    def contrast(self) -> float:
        """Peak-to-peak amplitude 2A."""
        return 2.0 * self.amplitude

    @property
    def minimum(self) -> float:
        return self.offset - self.amplitude

    def to_document(self) -> Dict[str, Any]:
        return {"contrast": self.contrast, "amplitude": self.amplitude, "offset": self.offset,
                "phase": self.phase, "minimum": self.minimum, "residual_rms": self.residual,
                "points": [{"phase": p, "value": v} for p, v in zip(self.phases, self.values)]}


def fit_ramsey(phases: Sequence[float], values: Sequence[float]) -> RamseyFit:
    """Least-squares A cos(phi - phi0) + B."""
    phases = np.asarray(phases, dtype=float)
    values = np.asarray(values, dtype=float)
    if phases.size < RAMSEY_MIN_POINTS or phases.size != values.size:
        raise FitError(f"need at least {RAMSEY_MIN_POINTS} phase points, got {phases.size}")
    design = np.column_stack([np.cos(phases), np.sin(phases), np.ones_like(phases)])
    if np.linalg.matrix_rank(design) < 3:
        raise FitError("phase points do not determine a sinusoid")
    (a, b, c), *_ = np.linalg.lstsq(design, values, rcond=None)
    amplitude = math.hypot(a, b)
    if amplitude < 1e-12:
        raise FitError("no oscillation in Ramsey data")
    residual = float(np.sqrt(np.mean((design @ np.array([a, b, c]) - values) ** 2)))
    phase = math.atan2(b, a) % (2.0 * math.pi)
    return RamseyFit(amplitude, float(c), phase, residual, tuple(phases.tolist()), tuple(values.tolist()))


def ramsey_phases(points: int = 16) -> np.ndarray:
    return np.linspace(0.0, 2.0 * math.pi, points, endpoint=False)


def ramsey_builder(config: RunConfig, include_mcm: bool = True):
    """phi -> IR of pi/2 -- [MCM] -- pi/2(phi); phi = 0 is the in-phase analysis pulse."""
    def build(phi: float) -> SequenceIR:
        return build_mcm_sequence(config, "x", output=(math.pi / 2.0, phi - math.pi / 2.0),
                                  include_mcm=include_mcm)
    return build


def ramsey_scan(config: RunConfig, phases: Optional[Sequence[float]] = None,
                shots: Optional[int] = None, seed: Optional[int] = None,
                include_mcm: bool = True, noise: bool = True,
                calibration: Optional[Calibration] = None) -> RamseyFit:
    """Data-qubit Ramsey fringe through the measurement.

    Without ``shots`` the fringe is the quasi-static-noise expectation
    (Gauss-Hermite average, ideal readout light). With ``shots`` every phase
    point is a full Monte-Carlo experiment.
    """
    phases = ramsey_phases() if phases is None else np.asarray(phases, dtype=float)
    build = ramsey_builder(config, include_mcm)
    if shots is not None:
        cal = calibration or calibrate(config, noise=noise)
        model = noise_model(config, cal, seed) if noise else NoiseModel()
        values = [run_experiment(config, shots=shots, seed=seed, ir=build(phi), noise=model)
                  .data_retention().value for phi in phases]
    else:
        values = _expected_fringe(config, build, phases, noise, calibration)
    fit = fit_ramsey(phases, values)
    logger.info("Ramsey contrast %.4f, phase %.4f rad", fit.contrast, fit.phase)
    return fit


def _expected_fringe(config: RunConfig, build, phases: np.ndarray, noise: bool,
                     calibration: Optional[Calibration]) -> List[float]:
    if noise:
        cal = calibration or calibrate(config)
        zx, zw = gauss_hermite(5)
        ax, aw = gauss_hermite(config.noise.quadrature_nodes) if cal.sigma_amplitude > 0 else (np.zeros(1), np.ones(1))
        nodes = [(NoiseDeviate(cal.sigma_zeeman * z, cal.sigma_amplitude * a), wz * wa)
                 for z, wz in zip(zx, zw) for a, wa in zip(ax, aw)]
    else:
        nodes = [(NoiseDeviate(), 1.0)]
    irs = [build(phi) for phi in phases]
    site = irs[0].data_sites[0]
    env = config.environment()
    values = np.zeros(len(phases))
    for deviate, weight in nodes:
        propagator = Propagator(env, deviate, config.calibration.window)
        before = run_site(irs[0], site, AtomState.from_level(STRETCHED), propagator,
                          sections={"prep", "input", "mcm"})
        for i, ir in enumerate(irs):
            event = ir.pulses("output")[0]
            op = event.payload.op
            state = propagator.idle(before.state, event.start_s - before.time)
            state = propagator.pulse(state, op, event.start_s)
            values[i] += weight * state.manifold_population(3)
    return values.tolist()

