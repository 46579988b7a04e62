"""Configuration management for resilient-diffusion."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class SimulationDefaultsModel(BaseModel):
    """Defaults applied to experiment documents that leave a value unset."""

    runs: int = Field(
        default=20,
        ge=1,
        description="Monte-Carlo runs for qualitative experiments",
    )
    theory_runs: int = Field(
        default=100,
        ge=1,
        description="Monte-Carlo runs for theory-match experiments",
    )
    gm_lambda: float = Field(
        default=1.0,
        gt=0.0,
        description="Geman-McClure scale parameter when a config omits it",
    )
    gamma_sq_init: float = Field(
        default=1.0,
        gt=0.0,
        description="Initial value of every gamma^2 memory",
    )
    gamma_floor: float = Field(
        default=1e-12,
        gt=0.0,
        description="Lower bound keeping gamma^-2 finite",
    )
    divergence_threshold: float = Field(
        default=1e6,
        gt=0.0,
        description="Estimate 2-norm above which a run is marked divergent",
    )
    edge_threshold: float = Field(
        default=1e-3,
        ge=0.0,
        description="Average final weight above which an edge counts as alive",
    )
    msd_every: int = Field(
        default=1,
        ge=1,
        description="Record metrics every k iterations",
    )


class SimulatorSettings(BaseSettings):
    """Process-level settings."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
        env_prefix="RDIFF_",
        # Lets RDIFF_DEFAULTS__RUNS=50 bind a single nested field instead of
        # requiring a whole-object JSON blob in RDIFF_DEFAULTS.
        env_nested_delimiter="__",
    )

    # Logging settings
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = Field(
        default="INFO",
        description="Logging level",
    )
    log_format: Literal["json", "console"] = Field(
        default="console",
        description="Log format",
    )
    log_show_caller: bool = Field(default=False, description="Show caller info in logs")

    # Execution
    n_jobs: int = Field(
        default=1,
        ge=1,
        le=256,
        description="Worker count for Monte-Carlo runs",
    )
    parallel_backend: Literal["loky", "threading", "sequential"] = Field(
        default="loky",
        description="joblib backend used when n_jobs > 1",
    )

    defaults: SimulationDefaultsModel = Field(
        default_factory=SimulationDefaultsModel,
        description="Experiment defaults",
    )


# Global settings instance
settings = SimulatorSettings()


def get_defaults() -> SimulationDefaultsModel:
    """Get experiment defaults from global settings."""
    return settings.defaults
