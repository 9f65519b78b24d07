# src/ergodic_lab/utils/config.py
"""
Run configuration: pydantic models for TOML/JSON/YAML run files, the config
hash, and process-level settings from ~/.config/ergodic-lab/config.json and the
EAL_* environment variables.
"""
from __future__ import annotations

import hashlib
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Sequence, Tuple, Union

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError
from pydantic import field_validator, model_validator

from ..constants import resolve
from ..engine import DEFAULT_BUDGET, ExperimentSpec, IterateSequence, draw_start_points
from ..errors import ConfigError, LabError
from ..expr import FunctionSpec
from ..funclass import CATALOG, CLASS_NAMES, Verdict, catalog_function
from ..systems import (
    CircleRotation,
    FiniteCycle,
    Indicator,
    Observable,
    Product,
    State,
    Suspension,
    SystemSpec,
    Tabulated,
    TensorProduct,
    TrigPoly,
    point_from_values,
)
from .validation import ValidationError, validate_schedule

# Config file location: ~/.config/ergodic-lab/config.json
CONFIG_DIR = Path.home() / ".config" / "ergodic-lab"
CONFIG_FILE = CONFIG_DIR / "config.json"

Number = Union[float, str]
ComplexValue = Union[float, str, List[float]]

CommandName = Literal["classify", "average", "limit", "invariance", "occupancy", "sweep"]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


def _complex(value: ComplexValue) -> complex:
    if isinstance(value, list):
        if len(value) != 2:
            raise ConfigError(f"complex values are [re, im], got {value}")
        return complex(float(value[0]), float(value[1]))
    if isinstance(value, str):
        return complex(resolve(value).hi)
    return complex(float(value))


# ============================================================================
# Systems
# ============================================================================

class RotationConfig(_Model):
    """x -> x + angle; give ``angle`` (any resolvable number) or ``p``/``q``."""

    type: Literal["rotation"] = "rotation"
    angle: Optional[Number] = None
    p: Optional[int] = None
    q: Optional[int] = None

    @model_validator(mode="after")
    def _one_form(self) -> "RotationConfig":
        if (self.angle is None) == (self.p is None or self.q is None):
            raise ValueError("rotation needs either 'angle' or both 'p' and 'q'")
        return self

    def build(self) -> SystemSpec:
        if self.p is not None and self.q is not None:
            return CircleRotation.from_rational(self.p, self.q)
        return CircleRotation.from_angle(self.angle)


class CycleConfig(_Model):
    type: Literal["cycle"] = "cycle"
    q: int = Field(gt=0)
    step: int = 1

    def build(self) -> SystemSpec:
        return FiniteCycle(self.q, self.step)


class ProductConfig(_Model):
    type: Literal["product"] = "product"
    factors: List["SystemConfig"] = Field(min_length=1)

    def build(self) -> SystemSpec:
        return Product(tuple(f.build() for f in self.factors))


class SuspensionConfig(_Model):
    type: Literal["suspension"] = "suspension"
    base: "SystemConfig"
    gamma: Number

    def build(self) -> SystemSpec:
        return Suspension(self.base.build(), resolve(self.gamma))


SystemConfig = Annotated[
    Union[RotationConfig, CycleConfig, ProductConfig, SuspensionConfig],
    Field(discriminator="type"),
]


# ============================================================================
# Observables
# ============================================================================

class TrigConfig(_Model):
    """Σ c_m e(m x); keys are integer modes, values a number or [re, im]."""

    type: Literal["trig"] = "trig"
    coefficients: Dict[str, ComplexValue]

    @field_validator("coefficients")
    @classmethod
    def _integer_modes(cls, value: Dict[str, ComplexValue]) -> Dict[str, ComplexValue]:
        for key in value:
            try:
                int(key)
            except ValueError:
                raise ValueError(f"trig mode must be an integer, got {key!r}")
        return value

    def build(self) -> Observable:
        return TrigPoly.from_dict({int(m): _complex(c) for m, c in self.coefficients.items()})


class IndicatorConfig(_Model):
    type: Literal["indicator"] = "indicator"
    start: float
    end: float

    def build(self) -> Observable:
        return Indicator.interval(self.start, self.end)


class TabulatedConfig(_Model):
    type: Literal["tabulated"] = "tabulated"
    values: List[ComplexValue] = Field(min_length=1)

    def build(self) -> Observable:
        return Tabulated(tuple(_complex(v) for v in self.values))


class TensorConfig(_Model):
    type: Literal["tensor"] = "tensor"
    factors: List["ObservableConfig"] = Field(min_length=1)

    def build(self) -> Observable:
        return TensorProduct(tuple(f.build() for f in self.factors))


ObservableConfig = Annotated[
    Union[TrigConfig, IndicatorConfig, TabulatedConfig, TensorConfig],
    Field(discriminator="type"),
]


# ============================================================================
# Iterates and functions
# ============================================================================

class FunctionConfig(_Model):
    """A DSL expression or a catalog entry."""

    expr: Optional[str] = None
    catalog: Optional[str] = None
    name: Optional[str] = None
    domain_start: Optional[float] = None

    @model_validator(mode="after")
    def _one_source(self) -> "FunctionConfig":
        if (self.expr is None) == (self.catalog is None):
            raise ValueError("give exactly one of 'expr' or 'catalog'")
        return self

    def build(self) -> FunctionSpec:
        if self.catalog is not None:
            if (self.domain_start is None and self.name is None) or self.catalog not in CATALOG:
                return catalog_function(self.catalog)
            return FunctionSpec.from_text(
                CATALOG[self.catalog], self.domain_start, self.name or self.catalog
            )
        return FunctionSpec.from_text(self.expr, self.domain_start, self.name)


class SublinearIterateConfig(FunctionConfig):
    type: Literal["sublinear"] = "sublinear"

    def build_iterate(self, budget: int) -> IterateSequence:
        return IterateSequence.sublinear(self.build(), budget)


class LinearIterateConfig(_Model):
    """n -> slope·n + offset; an exact rational slope is given as ``p``/``q``."""

    type: Literal["linear"] = "linear"
    slope: Optional[Number] = None
    p: Optional[int] = None
    q: Optional[int] = None
    offset: Number = 0.0

    @model_validator(mode="after")
    def _one_form(self) -> "LinearIterateConfig":
        if (self.slope is None) == (self.p is None or self.q is None):
            raise ValueError("linear iterate needs either 'slope' or both 'p' and 'q'")
        return self

    def build_iterate(self, budget: int) -> IterateSequence:
        offset = resolve(self.offset)
        if self.p is not None and self.q is not None:
            return IterateSequence.linear_rational(self.p, self.q, offset.hi, budget)
        slope = resolve(self.slope)
        if not slope.hi > 0:
            raise ConfigError(f"linear slope must be positive, got {slope.hi}")
        return IterateSequence.linear(slope, offset, budget)


IterateConfig = Annotated[
    Union[SublinearIterateConfig, LinearIterateConfig],
    Field(discriminator="type"),
]


# ============================================================================
# Schedules, tolerances and command sections
# ============================================================================

class ScheduleConfig(_Model):
    """Explicit checkpoints, or a geometric schedule first·ratio^k up to last."""

    checkpoints: Optional[List[int]] = None
    first: int = Field(default=1000, gt=0)
    last: int = Field(default=100_000, gt=0)
    ratio: int = Field(default=10, gt=1)

    def resolve(self, budget: Optional[int] = None) -> List[int]:
        if self.checkpoints is not None:
            return validate_schedule(self.checkpoints, budget)
        values = []
        n = self.first
        while n <= self.last:
            values.append(n)
            n *= self.ratio
        return validate_schedule(values, budget)


class ToleranceConfig(_Model):
    """Pass/fail thresholds; unset thresholds are not checked."""

    final: Optional[float] = Field(default=None, gt=0)
    decreasing_runs: Optional[int] = Field(default=None, ge=0)
    oracle: float = Field(default=1e-3, gt=0)
    closed_forms: float = Field(default=1e-10, gt=0)
    defect: Optional[float] = Field(default=None, gt=0)
    floor_fraction: Optional[float] = Field(default=None, gt=0)
    identity: float = Field(default=1e-9, gt=0)
    bound_slack: float = Field(default=1e-12, ge=0)
    shrinking: bool = False


class InvarianceConfig(_Model):
    g: ObservableConfig
    r: Optional[int] = None
    window_floor: bool = False


class LimitConfig(_Model):
    oracle: bool = True
    suspension: bool = False
    samples: int = Field(default=100_000, gt=0)


class SweepConfig(_Model):
    """Cells are exponent vectors (c_1, ..., c_d) or (gamma, ell) pairs."""

    exponents: List[List[Number]] = Field(default_factory=list)
    gamma_ell: List[Tuple[Number, Number]] = Field(default_factory=list)
    rotation_by_inverse: bool = False

    @model_validator(mode="after")
    def _one_grid(self) -> "SweepConfig":
        if bool(self.exponents) == bool(self.gamma_ell):
            raise ValueError("sweep needs exactly one of 'exponents' or 'gamma_ell'")
        return self

    @property
    def cells(self) -> List[Tuple[Number, ...]]:
        if self.exponents:
            return [tuple(c) for c in self.exponents]
        return [tuple(pair) for pair in self.gamma_ell]


class RunConfig(_Model):
    command: Optional[CommandName] = None
    name: str = "run"
    seed: int = 0
    runs: int = Field(default=1, gt=0)
    coupling: Literal["product", "diagonal"] = "product"
    budget: Optional[int] = Field(default=None, gt=0)
    workers: Optional[int] = Field(default=None, gt=0)
    systems: List[SystemConfig] = Field(default_factory=list)
    observables: List[ObservableConfig] = Field(default_factory=list)
    iterates: List[IterateConfig] = Field(default_factory=list)
    starts: Optional[List[List[Any]]] = None
    schedule: ScheduleConfig = Field(default_factory=ScheduleConfig)
    tolerance: ToleranceConfig = Field(default_factory=ToleranceConfig)
    functions: List[FunctionConfig] = Field(default_factory=list)
    classes: List[str] = Field(default_factory=lambda: list(CLASS_NAMES))
    expected: Dict[str, Dict[str, Literal["holds", "fails", "inconclusive"]]] = Field(
        default_factory=dict
    )
    invariance: Optional[InvarianceConfig] = None
    limit: LimitConfig = Field(default_factory=LimitConfig)
    sweep: Optional[SweepConfig] = None
    out: Optional[str] = None

    @field_validator("classes")
    @classmethod
    def _known_classes(cls, value: List[str]) -> List[str]:
        unknown = [c for c in value if c not in CLASS_NAMES]
        if unknown:
            raise ValueError(f"unknown class name(s): {', '.join(unknown)}")
        return value

    @model_validator(mode="after")
    def _aligned(self) -> "RunConfig":
        # occupancy runs may list iterates alone
        if self.systems or self.observables:
            sizes = {len(self.systems), len(self.observables), len(self.iterates)}
            if len(sizes) != 1:
                raise ValueError("systems, observables and iterates must have the same length")
        if self.starts is not None:
            if len(self.starts) != self.runs:
                raise ValueError(f"'starts' lists {len(self.starts)} runs but runs = {self.runs}")
            for run in self.starts:
                if len(run) != len(self.systems):
                    raise ValueError("each entry of 'starts' needs one value per system")
        return self

    @property
    def d(self) -> int:
        return len(self.iterates)

    def require_experiment(self, command: str) -> None:
        if not self.iterates or not self.systems:
            raise ConfigError(f"'{command}' needs systems, observables and iterates")

    def expected_verdicts(self) -> Dict[str, Dict[str, Verdict]]:
        return {f: {c: Verdict(v) for c, v in table.items()} for f, table in self.expected.items()}


ProductConfig.model_rebuild()
SuspensionConfig.model_rebuild()
TensorConfig.model_rebuild()
InvarianceConfig.model_rebuild()
RunConfig.model_rebuild()


# ============================================================================
# Loading and hashing
# ============================================================================

def _read_mapping(path: Path) -> Dict[str, Any]:
    suffix = path.suffix.lower()
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        if suffix == ".toml":
            data = tomllib.loads(text)
        elif suffix == ".json":
            data = json.loads(text)
        elif suffix in (".yaml", ".yml"):
            data = yaml.safe_load(text)
        else:
            raise ConfigError(f"unsupported config format {suffix!r}: use .toml, .json or .yaml")
    except (tomllib.TOMLDecodeError, json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must contain a table at the top level")
    return data


def parse_config(data: Dict[str, Any]) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except PydanticValidationError as exc:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}"
            for err in exc.errors()
        )
        raise ConfigError(f"invalid config: {problems}") from exc


def load_config(path: Union[str, Path]) -> RunConfig:
    """Read and validate a run config selected by file extension."""
    return parse_config(_read_mapping(Path(path)))


def config_hash(config: RunConfig) -> str:
    """SHA-256 of the canonical JSON of the validated model (workers excluded)."""
    payload = config.model_dump(mode="json", exclude={"workers"})
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# ============================================================================
# Building experiments
# ============================================================================

def build_iterates(config: RunConfig, budget: int) -> List[IterateSequence]:
    return [it.build_iterate(budget) for it in config.iterates]


def start_points(
    config: RunConfig, systems: Sequence[SystemSpec], run: int
) -> Tuple[List[State], str]:
    """Explicit start points for ``run`` or a seeded draw; returns the decision applied."""
    if config.starts is not None:
        try:
            points = [point_from_values(s, v) for s, v in zip(systems, config.starts[run])]
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"invalid start point for run {run}: {exc}") from exc
        return points, "starts=explicit"
    seed = config.seed + run
    return draw_start_points(systems, config.coupling, seed), f"starts=seeded:{config.seed}+run"


def build_experiments(
    config: RunConfig,
    budget: int,
    iterates: Optional[List[IterateSequence]] = None,
    validate_growth: bool = True,
) -> List[ExperimentSpec]:
    """One ExperimentSpec per run; iterates are shared so floors are computed once."""
    try:
        systems = [s.build() for s in config.systems]
        observables = [o.build() for o in config.observables]
        shared = iterates if iterates is not None else build_iterates(config, budget)
    except LabError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc
    experiments = []
    for run in range(config.runs):
        starts, decision = start_points(config, systems, run)
        spec = ExperimentSpec(
            systems=list(systems),
            observables=list(observables),
            iterates=shared,
            starts=starts,
            coupling=config.coupling,
            seed=config.seed + run,
            decisions=[decision, "rng=numpy-pcg64", "summation=block4096-kahan64-pairwise"],
        )
        experiments.append(spec)
    if validate_growth and experiments:
        experiments[0].validate_growth_order()
    return experiments


# ============================================================================
# Process settings
# ============================================================================

@dataclass
class Settings:
    workers: int = 1
    budget: int = DEFAULT_BUDGET
    out_dir: str = "results"
    verbose: bool = False
    quiet: bool = False


def _env_bool(name: str, *, default: bool = False) -> bool:
    """
    Parse boolean-like env vars.
    True  if value in: 1, true, yes, on
    False if value in: 0, false, no, off
    Else: default
    """
    v = os.getenv(name)
    if v is None:
        return default
    v = v.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    return default


def _env_int(name: str, default: int) -> int:
    try:
        return int(os.environ.get(name, default))
    except ValueError:
        return default


def _load_config_file() -> dict:
    """Load settings from ~/.config/ergodic-lab/config.json if it exists."""
    if CONFIG_FILE.exists():
        try:
            data = json.loads(CONFIG_FILE.read_text())
            return data if isinstance(data, dict) else {}
        except Exception:
            return {}
    return {}


def load_settings() -> Settings:
    # Config file first, then environment variables on top
    file_config = _load_config_file()

    workers = _env_int("EAL_WORKERS", int(file_config.get("workers", 1)))
    budget = _env_int("EAL_BUDGET", int(file_config.get("budget", DEFAULT_BUDGET)))
    out_dir = os.environ.get("EAL_OUT_DIR") or file_config.get("out_dir") or "results"

    verbose = _env_bool("EAL_VERBOSE", default=bool(file_config.get("verbose", False)))
    quiet = _env_bool("EAL_QUIET", default=bool(file_config.get("quiet", False)))

    return Settings(
        workers=max(1, workers),
        budget=max(1, budget),
        out_dir=str(out_dir),
        verbose=verbose,
        quiet=quiet,
    )


__all__ = [
    "RunConfig",
    "SystemConfig",
    "ObservableConfig",
    "IterateConfig",
    "ScheduleConfig",
    "ToleranceConfig",
    "SweepConfig",
    "Settings",
    "ValidationError",
    "load_config",
    "parse_config",
    "config_hash",
    "build_experiments",
    "load_settings",
]
