import hashlib
import json
from pathlib import Path
from typing import Annotated, Any, Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from coevonet.exceptions import ConfigError, UsageError
from coevonet.model import ModelParams
from coevonet.trajectory import checkpoint_grid

__all__ = [
    "Mode",
    "ModelParamsConfig",
    "DistanceKernelInit",
    "ConstantGraphonInit",
    "GraphFileInit",
    "SampleGraphonInit",
    "InitSpec",
    "VerifyOptions",
    "MixingOptions",
    "PolarisationOptions",
    "CompareOptions",
    "ExperimentConfig",
    "load_config",
    "config_hash",
]

Mode = Literal["simulate", "limit", "compare", "verify-generator", "mixing-check", "polarisation"]

# modes that integrate a path and so need a horizon
_DYNAMIC_MODES = ("simulate", "limit", "compare", "polarisation")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ModelParamsConfig(_Strict):
    """Validates the six rate constants before they reach the model"""

    eta: float = Field(gt=0, description="Flip rate per discordant neighbour")
    rho: float = Field(gt=0, description="Time scale of edge switching")
    s_c0: float = Field(ge=0, description="Switching rate of an absent concordant pair")
    s_c1: float = Field(ge=0, description="Switching rate of a present concordant pair")
    s_d0: float = Field(ge=0, description="Switching rate of an absent discordant pair")
    s_d1: float = Field(ge=0, description="Switching rate of a present discordant pair")

    def to_params(self) -> ModelParams:
        return ModelParams(**self.model_dump())


class DistanceKernelInit(_Strict):
    kind: Literal["distance_kernel"] = Field(
        description="Black first half, concordant pairs rarely and discordant pairs often connected"
    )


class ConstantGraphonInit(_Strict):
    kind: Literal["constant_graphon"] = Field(
        description="Homogeneous start with edge density p and white share q"
    )
    p: float = Field(ge=0, le=1, description="Initial edge density")
    q: float = Field(ge=0, le=1, description="Initial fraction of white vertices")


class GraphFileInit(_Strict):
    kind: Literal["graph_file"] = Field(description="A coloured graph saved as JSON")
    path: Path = Field(description="Path of the graph file, relative paths resolve against the config file")


class SampleGraphonInit(_Strict):
    kind: Literal["sample_graphon"] = Field(description="Finite graphs sampled from a graphon saved as JSON")
    path: Path = Field(description="Path of the graphon file, relative paths resolve against the config file")


InitSpec = Annotated[
    DistanceKernelInit | ConstantGraphonInit | GraphFileInit | SampleGraphonInit,
    Field(discriminator="kind"),
]


class VerifyOptions(_Strict):
    max_size: int = Field(default=3, ge=1, le=4, description="Largest motif checked against the oracle")
    n_values: list[int] = Field(default=[4, 6, 8], description="Graph sizes for the residual scaling check")
    graphs: int = Field(default=200, ge=1, description="Random graphs per size; sizes up to 4 are enumerated")
    colour_sum_graphs: int = Field(
        default=50, ge=1, description="Random graphs for the colour-sum identities"
    )

    @model_validator(mode="after")
    def _sizes(self) -> "VerifyOptions":
        if len(self.n_values) < 2 or any(n < 2 for n in self.n_values):
            raise ValueError("n_values needs at least two graph sizes, each at least 2")
        return self


class MixingOptions(_Strict):
    n: int = Field(default=100, ge=2, description="Vertices of the random test graph")
    edge_probability: float = Field(default=0.5, gt=0, le=1, description="Edge probability of the test graph")
    times: list[float] = Field(default=[0.01, 0.05, 0.1], min_length=1, description="Times of the table rows")


class PolarisationOptions(_Strict):
    p0_values: list[float] = Field(
        default=[0.25, 0.5, 0.75], min_length=1, description="Initial edge densities"
    )
    q0: float = Field(default=0.5, gt=0, lt=1, description="Initial white fraction")
    samples: int = Field(default=4000, ge=2, description="Monte Carlo paths per estimator")
    finite_n: int | None = Field(
        default=None, ge=2, description="Graph size of the finite-n absorption check"
    )
    finite_p0: float = Field(
        default=0.5, ge=0, le=1, description="Initial edge density of the finite-n check"
    )


class CompareOptions(_Strict):
    gap_times: list[float] = Field(
        default=[0.0, 0.5],
        min_length=1,
        description="Checkpoints at which the homogenisation gap is measured",
    )
    connectivity_floor: float = Field(
        default=0.0,
        ge=0,
        description="Warn when the initial common-neighbour density is at or below this value",
    )


class ExperimentConfig(_Strict):
    """A validated experiment; nothing runs until every mode-specific requirement holds"""

    mode: Mode = Field(description="What to run")
    params: ModelParamsConfig = Field(description="Rate constants of the dynamics")
    init: InitSpec | None = Field(
        default=None, description="Initial state of simulate, limit and compare runs"
    )
    n: int | None = Field(default=None, ge=2, description="Vertex count of finite-n runs")
    m: int = Field(default=64, ge=1, description="Grid size of limit kernels")
    horizon: float | None = Field(default=None, gt=0, description="Final time")
    step: float = Field(default=1e-3, gt=0, description="Time step of the limit integrator")
    checkpoints: int | list[float] = Field(
        default=100, description="Number of evenly spaced checkpoint intervals, or explicit checkpoint times"
    )
    ensemble: int = Field(default=1, ge=1, description="Independent runs, one random stream each")
    seed: int = Field(default=0, ge=0, description="Experiment seed")
    out: Path = Field(default=Path("out"), description="Output directory")
    max_size: int = Field(default=3, ge=1, le=4, description="Motif truncation for densities and gaps")
    threads: int | None = Field(
        default=None, ge=1, description="Worker cap, further limited by COEVONET_THREADS"
    )
    record_nu: bool = Field(
        default=False, description="Add the common-neighbour density column to finite-n runs"
    )
    record_motifs: bool = Field(default=False, description="Write motif-density tables next to each run")
    verify: VerifyOptions = Field(default_factory=VerifyOptions, description="verify-generator settings")
    mixing: MixingOptions = Field(default_factory=MixingOptions, description="mixing-check settings")
    polarisation: PolarisationOptions = Field(
        default_factory=PolarisationOptions, description="polarisation settings"
    )
    compare: CompareOptions = Field(default_factory=CompareOptions, description="compare settings")

    @model_validator(mode="after")
    def _mode_requirements(self) -> "ExperimentConfig":
        mode = self.mode
        if mode in _DYNAMIC_MODES and self.horizon is None:
            raise ValueError(f"mode {mode} needs a horizon")
        if mode in ("simulate", "limit", "compare") and self.init is None:
            raise ValueError(f"mode {mode} needs an init spec")
        if mode in ("simulate", "compare") and self.n is None and not isinstance(self.init, GraphFileInit):
            raise ValueError(f"mode {mode} needs n unless the initial graph is read from a file")
        if mode == "polarisation":
            p = self.params
            if not (p.s_c0 == 0 and p.s_d0 == 0 and p.s_c1 == p.s_d1 and p.s_c1 > 0):
                raise ValueError("polarisation mode needs s_c0 = s_d0 = 0 and s_c1 = s_d1 > 0")
        if self.horizon is not None:
            try:
                grid = checkpoint_grid(self.horizon, self.checkpoints)
            except UsageError as e:
                raise ValueError(e.message) from e
            if mode == "compare":
                gap_times = self.compare.gap_times
                missing = [t for t in gap_times if not np.isclose(grid, t, rtol=0, atol=1e-12).any()]
                if missing:
                    raise ValueError(f"gap times {missing} are not checkpoints")
        return self

    def resolve(self, base: Path) -> "ExperimentConfig":
        """Copy with a file-based init path made relative to ``base``"""
        init = self.init
        if isinstance(init, GraphFileInit | SampleGraphonInit) and not init.path.is_absolute():
            return self.model_copy(update={"init": init.model_copy(update={"path": base / init.path})})
        return self


def _field_errors(error: ValidationError) -> str:
    lines = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{location}: {item['msg']}")
    return "; ".join(lines)


def _validate(data: Any) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {_field_errors(e)}") from e


def load_config(path: str | Path, **overrides: Any) -> ExperimentConfig:
    """Read a YAML or JSON experiment file, apply the non-None overrides and validate it

    Raises
    ------
        ConfigError: the file cannot be read or parsed, or a field fails validation
    """
    path = Path(path)
    try:
        with open(path) as f:
            data = yaml.safe_load(f)
    except OSError as e:
        raise ConfigError(f"cannot read configuration {path}: {e}") from e
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse configuration {path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"configuration {path} must be a mapping")
    data.update({key: value for key, value in overrides.items() if value is not None})
    return _validate(data).resolve(path.parent)


def config_hash(config: ExperimentConfig) -> str:
    """sha256 of the canonical JSON form of a validated configuration"""
    canonical = json.dumps(config.model_dump(mode="json"), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()
