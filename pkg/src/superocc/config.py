"""Versioned JSON experiment configuration (unknown keys are rejected)."""
from __future__ import annotations

import json
from typing import List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import environment as env
from .errors import ConfigError, DomainError
from .kernels import Constant, GaussianBump
from .occupation import DEFAULT_EPS, Grid
from .particles import DEFAULT_POPULATION_CAP, SimConfig, measure_from_dict

SCHEMA_VERSION = 1


class Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DiracSpec(Strict):
    kind: Literal["dirac"]
    point: List[float]
    mass: float = 1.0


class WeightedDiracsSpec(Strict):
    kind: Literal["weighted_diracs"]
    points: List[List[float]]
    masses: List[float]


class GaussianDensitySpec(Strict):
    kind: Literal["gaussian_density"]
    mean: List[float]
    variance: float
    total_mass: float = 1.0


class ZeroSpec(Strict):
    kind: Literal["zero"]


class ConstantSpec(Strict):
    kind: Literal["constant"]
    c: float


class StationarySpec(Strict):
    kind: Literal["gaussian", "exponential"]
    sigma2: float
    length_scale: float


class BumpSpec(Strict):
    kind: Literal["bump"]
    center: List[float]
    h: float


class ConstFnSpec(Strict):
    kind: Literal["constant"]
    c: float = 1.0


MeasureSpec = Union[DiracSpec, WeightedDiracsSpec, GaussianDensitySpec]
KernelSpec = Union[ZeroSpec, ConstantSpec, StationarySpec]
FnSpec = Union[BumpSpec, ConstFnSpec]


class SimSection(Strict):
    d: int = 1
    mu: MeasureSpec = Field(default_factory=lambda: DiracSpec(kind="dirac", point=[0.0]))
    kernel: KernelSpec = Field(default_factory=lambda: ZeroSpec(kind="zero"))
    unit_mass: float = 1e-3
    horizon: float = 1.0
    snapshot_stride: int = 1
    population_cap: int = DEFAULT_POPULATION_CAP
    field_method: Literal["auto", "dense", "lowrank", "markov"] = "auto"


class GridSpec(Strict):
    lo: float = -2.0
    hi: float = 2.0
    n: int = 64


class Common(Strict):
    version: Literal[1] = 1
    seed: int = 0
    threads: int = 1
    out: Optional[str] = None


class SimulateConfig(Common):
    command: Literal["simulate"] = "simulate"
    sim: SimSection = Field(default_factory=SimSection)
    replicates: int = 1
    formats: List[Literal["csv", "binary"]] = ["csv", "binary"]
    density: Optional[GridSpec] = None
    bandwidth: float = 0.01


class MomentsConfig(Common):
    command: Literal["verify-moments"] = "verify-moments"
    sim: SimSection = Field(default_factory=SimSection)
    replicates: int = 400
    functions: List[FnSpec] = Field(default_factory=lambda: [ConstFnSpec(kind="constant"),
                                                            BumpSpec(kind="bump", center=[0.0], h=0.5)])
    second_moments: bool = True
    n_paths: int = 200_000
    dt_fk_fraction: float = 1e-3
    z_threshold: float = 4.0


class TanakaConfig(Common):
    command: Literal["tanaka"] = "tanaka"
    sim: SimSection = Field(default_factory=SimSection)
    replicates: int = 400
    a: List[float] = [0.0]
    alpha: float = 1.0
    eps: List[float] = list(DEFAULT_EPS)


class GreenConfig(Common):
    command: Literal["green-rep"] = "green-rep"
    sim: SimSection = Field(default_factory=SimSection)
    replicates: int = 100
    a: List[float] = [0.0]
    alpha: float = 1.0
    dt_levels: List[float] = [4e-3, 2e-3, 1e-3]
    min_ratio: float = 1.8


class HolderConfig(Common):
    command: Literal["holder"] = "holder"
    sim: SimSection = Field(default_factory=SimSection)
    replicates: int = 200
    grid: GridSpec = Field(default_factory=GridSpec)
    record_dt: float = 0.01
    t_min: float = 0.5
    n_lags: int = 6
    max_space_offset: int = 16
    max_time_offset: int = 20
    calibration_only: bool = False
    spatial_range: List[float] = [0.7, 1.1]
    temporal_range: List[float] = [0.35, 0.65]


class SelftestConfig(Common):
    command: Literal["kernel-selftest"] = "kernel-selftest"
    tolerance: float = 1e-6
    n_samples: int = 100


MODELS = {
    "simulate": SimulateConfig,
    "verify-moments": MomentsConfig,
    "tanaka": TanakaConfig,
    "green-rep": GreenConfig,
    "holder": HolderConfig,
    "kernel-selftest": SelftestConfig,
}


def load(command: str, path: str | None):
    """Parse and validate a config file (or defaults when ``path`` is None)."""
    model = MODELS[command]
    raw = {}
    if path is not None:
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON: {exc}") from None
        if raw.get("command", command) != command:
            raise ConfigError(f"config is for command {raw.get('command')!r}", "command")
    try:
        return model.model_validate(raw)
    except ValidationError as exc:
        err = exc.errors()[0]
        where = ".".join(str(p) for p in err["loc"])
        raise ConfigError(err["msg"], where) from None


def build_sim(section: SimSection, seed: int) -> SimConfig:
    try:
        return SimConfig(
            d=section.d,
            mu=measure_from_dict(section.mu.model_dump()),
            kernel=env.kernel_from_dict(section.kernel.model_dump()),
            unit_mass=section.unit_mass,
            horizon=section.horizon,
            snapshot_stride=section.snapshot_stride,
            seed=seed,
            population_cap=section.population_cap,
            field_method=section.field_method,
        )
    except ConfigError as exc:
        raise ConfigError(str(exc).split(": ", 1)[-1], f"sim.{exc.path}" if exc.path else "sim") from None
    except DomainError as exc:
        raise ConfigError(str(exc), "sim") from None


def build_fn(spec):
    if spec.kind == "bump":
        return GaussianBump(tuple(spec.center), spec.h)
    return Constant(spec.c)


def build_grid(spec: GridSpec, d: int) -> Grid:
    return Grid.uniform(spec.lo, spec.hi, spec.n, d)
