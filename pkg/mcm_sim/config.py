"""RunConfig schema, preset loading and atomic saving.

Presets are YAML (JSON is accepted too). Dimensional values keep their unit
text, e.g. ``bias_field: 10.2 G``, so that a loaded config dumps back to the
same document.
"""
from __future__ import annotations

import json
import logging
import os
import tempfile
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, get_args

import yaml
from pydantic import AfterValidator, BaseModel, ConfigDict, Field, field_validator
from pydantic import ValidationError as PydanticValidationError

from .atomic_model import FieldEnvironment, LevelState, ScatterParams, parse_transition, split_pair
from .errors import ConfigError, DomainError
from .pulse_engine import HornDrive
from .units import parse_quantity

logger = logging.getLogger(__name__)

PRESETS_DIR = Path(__file__).parent / "presets"
DEFAULT_PRESET = PRESETS_DIR / "default.yaml"
CONFIG_ENV = "MCM_SIM_CONFIG"


# --- ordered YAML ------------------------------------------------------------

class OrderedLoader(yaml.SafeLoader):
    pass


def construct_mapping(loader, node):
    loader.flatten_mapping(node)
    return OrderedDict(loader.construct_pairs(node))


OrderedLoader.add_constructor(yaml.resolver.BaseResolver.DEFAULT_MAPPING_TAG, construct_mapping)


class OrderedDumper(yaml.SafeDumper):
    pass


def dict_representer(dumper, data):
    return dumper.represent_dict(data.items())


OrderedDumper.add_representer(OrderedDict, dict_representer)
OrderedDumper.add_representer(dict, dict_representer)


def _plain(data: Any) -> Any:
    if isinstance(data, dict):
        return {k: _plain(v) for k, v in data.items()}
    if isinstance(data, (list, tuple)):
        return [_plain(v) for v in data]
    return data


def load_document(path: Path) -> Dict[str, Any]:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    try:
        if path.suffix.lower() == ".json":
            data = json.loads(text)
        else:
            data = yaml.load(text, Loader=OrderedLoader)
    except (yaml.YAMLError, json.JSONDecodeError) as e:
        raise ConfigError(f"cannot parse config {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping at top level")
    return _plain(data)


def dump_document(data: Dict[str, Any]) -> str:
    return yaml.dump(data, Dumper=OrderedDumper, default_flow_style=False,
                     allow_unicode=True, sort_keys=False)


def save_document(path: Path, data: Dict[str, Any]) -> Path:
    """Atomic save preserving key order."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(mode="w", dir=str(path.parent), delete=False,
                                     encoding="utf-8", suffix=".tmp") as tmp:
        tmp.write(dump_document(data))
        tmp_path = tmp.name
    os.replace(tmp_path, str(path))
    return path


# --- quantity fields ---------------------------------------------------------

@dataclass(frozen=True)
class Dim:
    name: str


def _checker(dim: str):
    def check(value: str) -> str:
        try:
            parse_quantity(value, dim)
        except ConfigError as e:
            raise ValueError(e.message) from None
        return value
    return check


Frequency = Annotated[str, Dim("frequency"), AfterValidator(_checker("frequency"))]
Rate = Annotated[str, Dim("rate"), AfterValidator(_checker("rate"))]
Time = Annotated[str, Dim("time"), AfterValidator(_checker("time"))]
Temperature = Annotated[str, Dim("temperature"), AfterValidator(_checker("temperature"))]
Field_ = Annotated[str, Dim("field"), AfterValidator(_checker("field"))]
Length = Annotated[str, Dim("length"), AfterValidator(_checker("length"))]

Probability = Annotated[float, Field(ge=0.0, le=1.0)]
Polarization = Tuple[float, float, float]


class Block(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    def si(self, name: str) -> Optional[float]:
        """SI value of a quantity field (angular for frequencies)."""
        value = getattr(self, name)
        if value is None:
            return None
        info = type(self).model_fields[name]
        dim = _find_dim(info.metadata) or _find_dim([info.annotation])
        if dim is None:
            raise ConfigError(f"field '{name}' is not a quantity")
        return parse_quantity(value, dim)


def _find_dim(items) -> Optional[str]:
    """Dimension marker of a field, looking inside Optional[...] annotations."""
    for item in items:
        if isinstance(item, Dim):
            return item.name
        found = _find_dim(getattr(item, "__metadata__", ())) or _find_dim(get_args(item))
        if found:
            return found
    return None


class PhysicsBlock(Block):
    bias_field: Field_ = "10.2 G"
    hyperfine: Frequency = "9.192631770 GHz"
    g3: float = -0.25
    g4: float = 0.25
    breit_rabi: bool = False
    g_j: float = 2.0
    g_i: float = 0.0


DEFAULT_RABI = OrderedDict([
    ("4,4->3,3", "99.9 kHz"),
    ("3,3->4,3", "37.9 kHz"),
    ("4,3->3,2", "87.7 kHz"),
    ("3,2->4,1", "18.1 kHz"),
    ("4,1->3,0", "59.9 kHz"),
    ("3,0->4,0", "62.8 kHz"),
    ("3,2->4,2", "51.8 kHz"),
    ("3,1->4,1", "56.2 kHz"),
    ("4,0->3,-1", "44.8 kHz"),
    ("3,0->4,-1", "22.4 kHz"),
    ("3,-1->4,-1", "58.4 kHz"),
])


class HornBlock(Block):
    pol_a: Polarization = (0.6, 0.0, 0.8)
    pol_b: Polarization = (0.8, 0.0, 0.6)
    amp_a: float = 1.0
    amp_b: float = 0.707


class CalibrationBlock(Block):
    rabi: Dict[str, Frequency] = Field(default_factory=lambda: dict(DEFAULT_RABI))
    horns: HornBlock = HornBlock()
    shelving_ratio: float = Field(2.0, gt=0)
    window: float = Field(100.0, gt=0)

    @field_validator("rabi")
    @classmethod
    def _transitions(cls, value: Dict[str, str]) -> Dict[str, str]:
        for key in value:
            try:
                parse_transition(key)
            except DomainError as e:
                raise ValueError(e.message) from None
        return value


class ReadoutBlock(Block):
    gamma: Frequency = "5.2 MHz"
    saturation: float = Field(3.0, ge=0)
    detuning_gamma: float = -2.0
    exposure: Time = "4 ms"
    trap_depth: Temperature = "1.8 mK"
    shelved_reduction: float = Field(0.91, ge=0)
    collection_efficiency: Probability = 0.005
    depump_probability: Probability = 1e-3
    depump_weights: Dict[int, float] = Field(
        default_factory=lambda: {3: 0.75, 2: 0.2, 1: 0.046, 0: 0.003, -1: 0.001})
    initial_temperature: Temperature = "10 uK"
    dff_heating: Temperature = "0.02 uK"
    recoil_heating: bool = True
    heating_mode: Literal["deterministic", "stochastic"] = "deterministic"
    loss_enabled: bool = True
    background_mean: float = Field(1.0, ge=0)
    camera_sigma: float = Field(2.5, ge=0)
    threshold_sigmas: float = Field(6.4, gt=0)
    threshold: Optional[float] = None

    @field_validator("depump_weights")
    @classmethod
    def _weights(cls, value: Dict[int, float]) -> Dict[int, float]:
        if any(abs(m) > 3 for m in value):
            raise ValueError("depump weights are indexed by f=3 m_f in [-3, 3]")
        if any(w < 0 for w in value.values()) or sum(value.values()) <= 0:
            raise ValueError("depump weights must be >= 0 with positive sum")
        return value


class OccupationBlock(Block):
    detuning_gamma: float = -9.0
    saturation: float = Field(5.0, ge=0)
    trap_depth: Temperature = "0.85 mK"
    exposure: Time = "30 ms"


class SequenceBlock(Block):
    echoes: int = Field(8, ge=0)
    repumps: int = Field(46, ge=0)
    ramp_duration: Time = "200 us"
    depth_start: Temperature = "0.85 mK"
    depth_ancilla: Temperature = "1.8 mK"
    array_size: int = Field(3, ge=3)
    hold: Literal["neighbors", "minus"] = "neighbors"
    data_sites_simulated: int = Field(1, ge=0)

    @field_validator("array_size")
    @classmethod
    def _odd(cls, value: int) -> int:
        if value % 2 == 0:
            raise ValueError("array size must be odd")
        return value


class ShiftOutBlock(Block):
    lifetime: Time = "165 ns"
    detuning: Frequency = "-24 GHz"
    epsilon: Optional[float] = Field(None, gt=0, lt=1)
    scatter: bool = True
    echo_compensation: bool = True


class NoiseBlock(Block):
    t2_star: Time = "3.2 ms"
    sigma_zeeman: Optional[Frequency] = None
    data_coherence: float = Field(0.975, gt=0, le=1)
    sigma_amplitude: Optional[float] = Field(None, ge=0)
    ancilla_clock_error: float = Field(0.004, ge=0, lt=0.5)
    ancilla_trap_shift: Optional[Frequency] = None
    quadrature_nodes: int = Field(9, ge=3, le=40)


class SpamBlock(Block):
    enabled: bool = False
    loss_pre: Probability = 0.0115
    loss_post: Probability = 0.0115
    prep_f3: Probability = 0.006
    prep_f4: Probability = 0.009
    blowaway: Probability = 0.005


class BudgetBlock(Block):
    alt_lifetime: Time = "1280 ns"
    microwave_rabi: Frequency = "44.8 kHz"
    photoelectron_target: float = Field(50.0, gt=0)
    target_efficiency: Probability = 0.15


class CoolingBlock(Block):
    gamma: Frequency = "124 kHz"
    omega_ratio: float = Field(2.0, gt=0)
    omega_g_over_gamma: float = Field(0.32, ge=0)
    saturation: float = Field(0.2, ge=0)
    detuning: Frequency = "0 Hz"
    temperature: Temperature = "10 uK"
    trap_depth: Temperature = "500 uK"
    waist: Length = "1 um"
    saturate: bool = True
    scan_min: float = Field(0.1, gt=0)
    scan_max: float = Field(1.0, gt=0)
    scan_points: int = Field(46, ge=1)
    molasses_rates: List[Rate] = Field(default_factory=lambda: ["1e4 1/s", "3e4 1/s", "1e5 1/s"])


class ExecutionBlock(Block):
    shots: int = Field(1000, ge=1)
    seed: int = Field(1234, ge=0)
    output_dir: str = "runs"


class RunConfig(Block):
    physics: PhysicsBlock = PhysicsBlock()
    calibration: CalibrationBlock = CalibrationBlock()
    readout: ReadoutBlock = ReadoutBlock()
    occupation: OccupationBlock = OccupationBlock()
    sequence: SequenceBlock = SequenceBlock()
    shiftout: ShiftOutBlock = ShiftOutBlock()
    noise: NoiseBlock = NoiseBlock()
    spam: SpamBlock = SpamBlock()
    budget: BudgetBlock = BudgetBlock()
    cooling: CoolingBlock = CoolingBlock()
    execution: ExecutionBlock = ExecutionBlock()

    def to_document(self) -> Dict[str, Any]:
        return _plain(self.model_dump(mode="json"))

    def to_json(self) -> str:
        return json.dumps(self.to_document(), sort_keys=True, separators=(",", ":"))

    def environment(self) -> FieldEnvironment:
        p = self.physics
        return FieldEnvironment(p.si("bias_field"), p.si("hyperfine"), p.g3, p.g4,
                                p.breit_rabi, p.g_j, p.g_i)

    def horn_drive(self) -> HornDrive:
        h = self.calibration.horns
        return HornDrive(tuple(h.pol_a), tuple(h.pol_b), h.amp_a, h.amp_b)

    def scatter_params(self, column: str = "mid-circuit") -> ScatterParams:
        """Readout light of the mid-circuit or the occupation column."""
        gamma = self.readout.si("gamma")
        if column == "mid-circuit":
            block = self.readout
        elif column == "occupation":
            block = self.occupation
        else:
            raise ConfigError(f"unknown readout column '{column}'")
        return ScatterParams(gamma=gamma, saturation=block.saturation,
                             detuning=block.detuning_gamma * gamma,
                             omega_q=self.physics.si("hyperfine"),
                             shelved_reduction=self.readout.shelved_reduction)

    def rabi_map(self) -> Dict[Tuple[LevelState, LevelState], float]:
        table = {}
        for key, value in self.calibration.rabi.items():
            table[split_pair(*parse_transition(key))] = parse_quantity(value, "frequency")
        return table

    def rabi(self, a: LevelState, b: LevelState) -> float:
        pair = split_pair(a, b)
        value = self.rabi_map().get(pair)
        if value is None:
            raise ConfigError(
                f"no Rabi calibration for {pair[0]} <-> {pair[1]}",
                diagnostics=[{"path": "calibration.rabi", "message": f"missing '{pair[1]}->{pair[0]}'"}],
            )
        return value

    def updated(self, **blocks: Dict[str, Any]) -> "RunConfig":
        """Copy with some block fields replaced (validated)."""
        data = self.to_document()
        for block, values in blocks.items():
            data.setdefault(block, {}).update(values)
        return parse_config(data)


def validation_diagnostics(error: PydanticValidationError) -> List[Dict[str, str]]:
    return [
        {"path": ".".join(str(p) for p in item["loc"]), "message": item["msg"]}
        for item in error.errors()
    ]


def parse_config(data: Dict[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except PydanticValidationError as e:
        diags = validation_diagnostics(e)
        first = diags[0] if diags else {"path": "", "message": str(e)}
        raise ConfigError(
            f"invalid config at '{first['path']}': {first['message']}", diagnostics=diags
        ) from None


def resolve_config_path(path: Optional[str] = None) -> Path:
    if path:
        return Path(path)
    env = os.environ.get(CONFIG_ENV)
    if env:
        logger.debug("config from %s=%s", CONFIG_ENV, env)
        return Path(env)
    return DEFAULT_PRESET


def load_config(path: Optional[str] = None) -> RunConfig:
    resolved = resolve_config_path(path)
    if not resolved.exists():
        raise ConfigError(f"config file {resolved} does not exist")
    config = parse_config(load_document(resolved))
    logger.debug("loaded config %s", resolved)
    return config


def config_schema() -> Dict[str, Any]:
    return RunConfig.model_json_schema()
