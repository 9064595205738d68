"""
Experiment configuration: schema, TOML/JSON loading and validation.
"""
from pathlib import Path
import copy
from typing import List, Literal, Optional, Union
import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from src.collision.schedule import CollisionSchedule, MeasurementBasis, PHI_SWAP
from src.config.presets import PRESETS
from src.config.settings import settings
from src.fockspace.states import QuadratureConvention, CavityState, prepare_state
from src.phase_estimation.base_estimator import PhaseEstConfig
from src.utils.exceptions import ConfigError

logger = logging.getLogger(__name__)


class Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class StateSpec(Section):
    """Initial cavity state."""
    kind: Literal["vacuum", "fock", "coherent", "displaced", "cat", "squeezed"] = "vacuum"
    n_fock: int = Field(default_factory=lambda: settings.n_fock, ge=1)
    alpha: float = 0.0
    alpha_imag: float = 0.0
    n: int = Field(default=0, ge=0)
    r: float = 0.0
    convention: Literal["half", "sqrt_half", "unit"] = "sqrt_half"

    @property
    def complex_alpha(self) -> complex:
        return complex(self.alpha, self.alpha_imag)

    def quadrature_convention(self) -> QuadratureConvention:
        return QuadratureConvention.from_name(self.convention)

    def build(self) -> CavityState:
        return prepare_state(self.kind, self.n_fock, self.complex_alpha, self.n, self.r)


class ScheduleSpec(Section):
    """Collision schedule; φ is given in radians or as a fraction of the full swap π/2."""
    phi: Optional[float] = Field(default=None, gt=0, le=PHI_SWAP)
    phi_swap_fraction: Optional[float] = Field(default=None, gt=0, le=1)
    ramp_slope: float = Field(default=0.0, ge=0)
    phi_max: float = Field(default=PHI_SWAP, gt=0, le=PHI_SWAP)
    n_bit: int = Field(default=200, ge=0)
    dt: float = Field(default=1e-6, gt=0)
    t_step: Optional[float] = Field(default=None, gt=0)
    kappa: float = Field(default=0.0, ge=0)
    p_read_err: float = Field(default=0.0, ge=0, lt=0.5)

    @model_validator(mode="after")
    def _one_coupling(self) -> "ScheduleSpec":
        if (self.phi is None) == (self.phi_swap_fraction is None):
            raise ValueError("give exactly one of phi and phi_swap_fraction")
        if self.t_step is not None and self.t_step < self.dt:
            raise ValueError(f"t_step={self.t_step} is shorter than dt={self.dt}")
        return self

    @property
    def coupling(self) -> float:
        return self.phi if self.phi is not None else self.phi_swap_fraction * PHI_SWAP

    def build(self, basis: MeasurementBasis) -> CollisionSchedule:
        options = {"dt": self.dt, "t_step": self.t_step, "kappa": self.kappa, "p_read_err": self.p_read_err}
        if self.ramp_slope > 0:
            return CollisionSchedule.ramp(self.coupling, self.ramp_slope, self.n_bit, basis, self.phi_max, **options)
        return CollisionSchedule.constant(self.coupling, self.n_bit, basis, **options)

    def build_heterodyne(self) -> CollisionSchedule:
        options = {"dt": self.dt, "t_step": self.t_step, "kappa": self.kappa, "p_read_err": self.p_read_err}
        if self.ramp_slope > 0:
            raise ValueError("Heterodyne runs use constant coupling")
        return CollisionSchedule.heterodyne(self.coupling, self.n_bit, **options)


class RunSpec(Section):
    """What to measure and how many times."""
    mode: Literal["homodyne", "homodyne-multi-angle", "heterodyne", "phase-est"] = "homodyne"
    theta: float = 0.0
    n_angles: int = Field(default=10, ge=2)
    n_traj: int = Field(default=1000, ge=0)
    seed: int = Field(default_factory=lambda: settings.default_seed, ge=0, lt=2 ** 64)
    workers: Optional[int] = Field(default=None, ge=1)
    filter: Literal["auto", "constant", "time-dependent", "lossy-optimal"] = "auto"
    compensate: bool = False

    @property
    def angles(self) -> List[float]:
        if self.mode == "homodyne-multi-angle":
            return [float(k * np.pi / self.n_angles) for k in range(self.n_angles)]
        return [self.theta]


class PhaseEstSpec(Section):
    """Phase-estimation protocol settings."""
    protocol: Literal["iterative", "nonadaptive", "adaptive"] = "iterative"
    n_m: int = Field(default=100, ge=1)
    epsilon: Optional[float] = Field(default=None, gt=0)
    n_fock: Optional[int] = Field(default=None, ge=2)

    def build(self, theta: float, convention: QuadratureConvention) -> PhaseEstConfig:
        return PhaseEstConfig(
            n_m=self.n_m, mode=self.protocol, epsilon=self.epsilon, theta=theta,
            n_fock=self.n_fock, convention=convention,
        )


class SweepSection(Section):
    """Parameter sweep around the base schedule."""
    parameter: Literal["n_bit", "phi", "n_traj", "p_read_err", "kappa"] = "n_bit"
    values: List[float] = Field(default_factory=list, min_length=1)
    repetitions: int = Field(default=1, ge=1)
    n_angles: int = Field(default=0, ge=0)
    vacuum_fraction: Optional[float] = Field(default=None, gt=0, lt=1)
    vacuum_rule: Literal["population", "vacuum"] = "population"
    compensate: bool = False


class OutputSpec(Section):
    """Where and under which name outputs are written."""
    directory: str = Field(default_factory=lambda: settings.output_directory)
    prefix: str = Field(default="run", min_length=1)


class ExperimentConfig(Section):
    """Complete, reproducible description of one experiment."""
    name: str = "experiment"
    state: StateSpec = Field(default_factory=StateSpec)
    schedule: ScheduleSpec = Field(default_factory=lambda: ScheduleSpec(phi_swap_fraction=0.1))
    run: RunSpec = Field(default_factory=RunSpec)
    phase_est: PhaseEstSpec = Field(default_factory=PhaseEstSpec)
    sweep: Optional[SweepSection] = None
    output: OutputSpec = Field(default_factory=OutputSpec)

    def to_dict(self) -> dict:
        return self.model_dump(mode="json")


def format_errors(error: ValidationError) -> List[str]:
    """One 'dotted.path: message' line per failing field."""
    lines = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{location}: {item['msg']}")
    return lines


def validate_config(data: dict, source: str = "<config>") -> ExperimentConfig:
    """Validate a parsed mapping, raising ConfigError with every field diagnostic."""
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        errors = format_errors(e)
        for line in errors:
            logger.error(f"{source}: {line}")
        raise ConfigError(f"Invalid configuration in {source}: " + "; ".join(errors), errors) from e


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """
    Load a TOML experiment file or a JSON run manifest.

    A manifest holds its configuration under the "config" key, so passing
    one back re-runs the dataset it describes.

    Args:
        path: .toml or .json file

    Returns:
        validated ExperimentConfig
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"Configuration file not found: {path}")
    text = path.read_text(encoding="utf-8")
    try:
        if path.suffix == ".toml":
            data = tomllib.loads(text)
        elif path.suffix == ".json":
            data = json.loads(text)
            data = data.get("config", data)
        else:
            raise ConfigError(f"Unsupported configuration format '{path.suffix}', expected .toml or .json")
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}", [str(e)]) from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}", [e.msg]) from e
    logger.info(f"Loaded configuration from {path}")
    return validate_config(data, str(path))


def load_preset(name: str, overrides: Optional[dict] = None) -> ExperimentConfig:
    """Validated configuration of a named preset, with optional section overrides."""
    if name not in PRESETS:
        raise ConfigError(f"Unknown preset '{name}', expected one of {sorted(PRESETS)}")
    data = copy.deepcopy(PRESETS[name])
    for section, values in (overrides or {}).items():
        if isinstance(values, dict):
            data.setdefault(section, {}).update(values)
        else:
            data[section] = values
    return validate_config(data, f"preset {name}")
