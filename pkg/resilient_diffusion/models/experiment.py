"""Experiment configuration document models."""

from __future__ import annotations

from pathlib import Path
from typing import Annotated, Any, Literal

import orjson
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from pydantic import ValidationError as PydanticValidationError

from resilient_diffusion.exceptions import ConfigurationError

from .enums import AlgorithmKind, BlockMode, ChannelProfile, RegressorStyle
from .network import InlineTopology, TopologySource
from .noise import GaussianNoise, NoiseModel

PerNodeFloat = float | dict[str, float]


class _ConfigBase(BaseModel):
    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class AdaptConfig(_ConfigBase):
    """Adaptation step parameters."""

    step_size: PerNodeFloat = Field(default=0.02, description="μ, shared or per node")
    gm_lambda: float | None = Field(default=None, gt=0.0, description="Geman-McClure λ")

    @field_validator("step_size")
    @classmethod
    def _positive_steps(cls, v: PerNodeFloat) -> PerNodeFloat:
        values = v.values() if isinstance(v, dict) else [v]
        if any(value <= 0.0 for value in values):
            raise ValueError("step sizes must be positive")
        return v


class CombineConfig(_ConfigBase):
    """Combination step parameters."""

    forgetting: PerNodeFloat = Field(default=0.01, description="ν, shared or per node")
    q_smoothing: float = Field(default=0.0, ge=0.0, lt=1.0, description="ρ for the Q estimate")
    removal_count: int = Field(default=1, ge=0, description="F extreme contributions removed")
    rank_own: bool = Field(
        default=False, description="Let a node's own contribution compete for removal"
    )
    gamma_sq_init: float | None = Field(default=None, gt=0.0, description="γ²(0)")
    gamma_floor: float | None = Field(default=None, gt=0.0, description="ε_γ")

    @field_validator("forgetting")
    @classmethod
    def _unit_interval(cls, v: PerNodeFloat) -> PerNodeFloat:
        values = v.values() if isinstance(v, dict) else [v]
        if any(not 0.0 < value < 1.0 for value in values):
            raise ValueError("forgetting factors must lie in (0, 1)")
        return v


class RegressorConfig(_ConfigBase):
    """Regressor declaration."""

    style: RegressorStyle = RegressorStyle.IID
    variance: float = Field(default=1.0, gt=0.0, description="σ_u² shared by all nodes")
    variance_range: tuple[float, float] | None = Field(
        default=None,
        description="Draw σ_u² per node uniformly from this range",
    )

    @field_validator("variance_range")
    @classmethod
    def _ordered_range(cls, v: tuple[float, float] | None) -> tuple[float, float] | None:
        if v is not None and not 0.0 < v[0] <= v[1]:
            raise ValueError("range must satisfy 0 < low <= high")
        return v


class HeterogeneityConfig(_ConfigBase):
    """Per-node multiplier on the Gaussian noise variances."""

    noise_scale_range: tuple[float, float] | None = Field(
        default=None,
        description="Multiply σ_v² (and σ_g²) per node by a uniform draw from this range",
    )

    @field_validator("noise_scale_range")
    @classmethod
    def _ordered_range(cls, v: tuple[float, float] | None) -> tuple[float, float] | None:
        if v is not None and not 0.0 < v[0] <= v[1]:
            raise ValueError("range must satisfy 0 < low <= high")
        return v


class AttackerConfig(_ConfigBase):
    """One Byzantine node's attack, overriding the shared defaults."""

    node: int = Field(ge=0)
    malicious_state: list[float] | dict[str, list[float]] = Field(
        description="wᵃ shared by all targets, or per target node id",
    )
    step: float = Field(default=0.01, gt=0.0, lt=1.0, description="μᵃ")


class AttackConfig(_ConfigBase):
    """Gradient-based Byzantine attack declaration."""

    malicious_state: list[float] | None = Field(
        default=None,
        description="wᵃ used by every Byzantine node without an override",
    )
    step: float = Field(default=0.01, gt=0.0, lt=1.0, description="μᵃ shared default")
    overrides: list[AttackerConfig] = Field(default_factory=list)
    start_iteration: int = Field(default=0, ge=0)


class GenericScenario(_ConfigBase):
    """Plain linear data model d = uᵀwᵒ + η."""

    kind: Literal["generic"] = "generic"


class LocalizationScenarioConfig(_ConfigBase):
    """Multi-target localization from noisy distance and direction readings."""

    kind: Literal["localization"] = "localization"
    targets: dict[str, list[float]] | None = Field(
        default=None,
        description="Cluster -> planar target; defaults to the ideal states",
    )


class SensingScenarioConfig(_ConfigBase):
    """Multi-task spectrum sensing over a rectangular basis expansion."""

    kind: Literal["sensing"] = "sensing"
    num_basis: int = Field(default=50, ge=1)
    num_freqs: int = Field(default=100, ge=1)
    active_bases: dict[str, list[int]] = Field(description="Cluster -> active basis indices")
    power: float = Field(default=0.7, ge=0.0, description="Power on each active basis")
    receiver_noise: float = Field(default=0.1, ge=0.0, description="σ_r²")
    background_divisor: float = Field(default=10.0, gt=0.0)
    channel: ChannelProfile = ChannelProfile.FLAT
    channel_sigma_db: float = Field(default=2.0, ge=0.0)
    block_mode: BlockMode = BlockMode.AVERAGE

    @model_validator(mode="after")
    def _bases_in_range(self) -> SensingScenarioConfig:
        for cluster, bases in self.active_bases.items():
            if any(not 0 <= m < self.num_basis for m in bases):
                raise ValueError(f"active basis out of range for cluster {cluster!r}")
        return self


ScenarioConfig = Annotated[
    GenericScenario | LocalizationScenarioConfig | SensingScenarioConfig,
    Field(discriminator="kind"),
]


class TraceConfig(_ConfigBase):
    """What to record while simulating."""

    msd_every: int | None = Field(default=None, ge=1, description="Record every k iterations")
    record_estimates: bool = Field(default=True, description="Record run-averaged estimates")
    snapshot_iterations: list[int] = Field(
        default_factory=list,
        description="Iterations at which run-averaged weights are snapshotted",
    )


class ExperimentConfig(_ConfigBase):
    """Full description of one experiment."""

    name: str = Field(default="experiment", min_length=1)
    topology: TopologySource
    scenario: ScenarioConfig = Field(default_factory=GenericScenario)
    algorithms: list[AlgorithmKind] = Field(default=[AlgorithmKind.RDLMG], min_length=1)
    adapt: AdaptConfig = Field(default_factory=AdaptConfig)
    combine: CombineConfig = Field(default_factory=CombineConfig)
    noise: NoiseModel = Field(default_factory=lambda: GaussianNoise(snr_db=20.0))
    regressor: RegressorConfig = Field(default_factory=RegressorConfig)
    heterogeneity: HeterogeneityConfig = Field(default_factory=HeterogeneityConfig)
    attack: AttackConfig | None = None
    ideal_states: dict[str, list[float]] | None = Field(
        default=None,
        description="Cluster -> ideal state; overrides the topology document",
    )
    initial_estimate: list[float] | None = Field(default=None, description="w_i(0), zeros if unset")
    iterations: int = Field(default=1000, ge=0, description="T")
    runs: int | None = Field(default=None, ge=1, description="R")
    seed: int = Field(default=0, ge=0, lt=2**64, description="Root seed")
    trace: TraceConfig = Field(default_factory=TraceConfig)
    divergence_threshold: float | None = Field(default=None, gt=0.0)

    def resolved(self) -> ExperimentConfig:
        """Return a copy with every default filled in and file topologies inlined.

        The resolved document reproduces the experiment on its own, which is
        what the output manifest records.
        """
        from resilient_diffusion.config import get_defaults
        from resilient_diffusion.topology import read_topology_document

        defaults = get_defaults()
        topology = self.topology
        if topology.kind == "file":
            document = read_topology_document(topology.path)
            topology = InlineTopology(**document.model_dump())
        return self.model_copy(
            update={
                "topology": topology,
                "adapt": self.adapt.model_copy(
                    update={"gm_lambda": self.adapt.gm_lambda or defaults.gm_lambda},
                ),
                "combine": self.combine.model_copy(
                    update={
                        "gamma_sq_init": self.combine.gamma_sq_init or defaults.gamma_sq_init,
                        "gamma_floor": self.combine.gamma_floor or defaults.gamma_floor,
                    },
                ),
                "runs": self.runs or defaults.runs,
                "trace": self.trace.model_copy(
                    update={"msd_every": self.trace.msd_every or defaults.msd_every},
                ),
                "divergence_threshold": self.divergence_threshold
                or defaults.divergence_threshold,
            },
            deep=True,
        )


def _format_location(loc: tuple[int | str, ...]) -> str:
    parts: list[str] = []
    for item in loc:
        if isinstance(item, int):
            parts.append(f"[{item}]")
        else:
            parts.append(f".{item}" if parts else item)
    return "".join(parts)


def parse_experiment_config(data: dict[str, Any]) -> ExperimentConfig:
    """Validate a raw mapping into an :class:`ExperimentConfig`.

    A manifest written by the harness is accepted too: its recorded
    ``config`` entry is the resolved experiment.

    Raises:
        ConfigurationError: on any schema violation, keyed by location
    """
    if "config" in data and "input_hash" in data:
        data = data["config"]
    try:
        return ExperimentConfig.model_validate(data)
    except PydanticValidationError as exc:
        first = exc.errors()[0]
        raise ConfigurationError(first["msg"], config_key=_format_location(first["loc"])) from exc


def load_experiment_config(path: str | Path) -> ExperimentConfig:
    """Read and validate an experiment document from a JSON file.

    Raises:
        ConfigurationError: when the file is missing, not JSON, or invalid
    """
    source = Path(path)
    try:
        raw = orjson.loads(source.read_bytes())
    except FileNotFoundError as exc:
        raise ConfigurationError("config file not found", config_key=str(source)) from exc
    except orjson.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON: {exc}", config_key=str(source)) from exc
    if not isinstance(raw, dict):
        raise ConfigurationError("config document must be a JSON object", config_key=str(source))
    config = parse_experiment_config(raw)
    topology = config.topology
    if topology.kind == "file" and not Path(topology.path).is_absolute():
        # Relative topology paths resolve against the config's directory.
        config = config.model_copy(
            update={"topology": topology.model_copy(update={"path": str(source.parent / topology.path)})},
        )
    return config
