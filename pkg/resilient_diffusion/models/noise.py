"""Noise model declarations.

The models are frozen pydantic documents used both in experiment configs and
directly by the samplers in :mod:`resilient_diffusion.signals`. ``snr_db``
is a declaration-time convenience; the harness resolves it to a concrete
per-node variance before sampling.
"""

from __future__ import annotations

import math
from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field, model_validator


class _NoiseBase(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")


class GaussianNoise(_NoiseBase):
    """Zero-mean Gaussian noise."""

    kind: Literal["gaussian"] = "gaussian"
    variance: float | None = Field(default=None, gt=0.0, description="Noise variance σ²")
    snr_db: float | None = Field(
        default=None,
        description="Resolve σ² per node as σ_u²‖w_iᵒ‖²·10^(−snr/10)",
    )

    @model_validator(mode="after")
    def _require_level(self) -> GaussianNoise:
        if self.variance is None and self.snr_db is None:
            raise ValueError("either variance or snr_db must be set")
        return self

    @property
    def effective_variance(self) -> float:
        """Noise variance; requires a resolved model."""
        if self.variance is None:
            raise ValueError("unresolved snr_db noise has no variance")
        return self.variance

    @property
    def finite_variance(self) -> bool:
        """Gaussian noise always has finite variance."""
        return True


class ContaminatedGaussianNoise(_NoiseBase):
    """Gaussian background plus Bernoulli-gated Gaussian impulses.

    η = v + b·g with v ~ N(0, σ_v²), g ~ N(0, σ_g²) and b ~ Bernoulli(p).
    """

    kind: Literal["contaminated_gaussian"] = "contaminated_gaussian"
    sigma_v2: float | None = Field(default=None, gt=0.0, description="Background variance σ_v²")
    snr_db: float | None = Field(
        default=None,
        description="Resolve σ_v² per node from the background SNR",
    )
    sigma_g2: float | None = Field(default=None, gt=0.0, description="Impulse variance σ_g²")
    sigma_g2_ratio: float | None = Field(
        default=None,
        ge=1.0,
        description="Impulse variance as a multiple of σ_v² (e.g. 1e4)",
    )
    p: float = Field(default=0.01, ge=0.0, le=1.0, description="Impulse probability")

    @model_validator(mode="after")
    def _check_levels(self) -> ContaminatedGaussianNoise:
        if self.sigma_v2 is None and self.snr_db is None:
            raise ValueError("either sigma_v2 or snr_db must be set")
        if self.sigma_g2 is None and self.sigma_g2_ratio is None:
            raise ValueError("either sigma_g2 or sigma_g2_ratio must be set")
        if (
            self.sigma_v2 is not None
            and self.sigma_g2 is not None
            and self.sigma_g2 < self.sigma_v2
        ):
            raise ValueError("sigma_g2 must be >= sigma_v2")
        return self

    @property
    def impulse_variance(self) -> float:
        """σ_g², from the explicit value or the ratio."""
        if self.sigma_g2 is not None:
            return self.sigma_g2
        if self.sigma_v2 is None or self.sigma_g2_ratio is None:
            raise ValueError("unresolved contaminated Gaussian noise")
        return self.sigma_g2_ratio * self.sigma_v2

    @property
    def effective_variance(self) -> float:
        """σ_η² = σ_v² + p·σ_g²."""
        if self.sigma_v2 is None:
            raise ValueError("unresolved snr_db noise has no variance")
        return self.sigma_v2 + self.p * self.impulse_variance

    @property
    def finite_variance(self) -> bool:
        """Contaminated Gaussian noise always has finite variance."""
        return True


class AlphaStableNoise(_NoiseBase):
    """Symmetric α-stable noise with characteristic function exp(−γᵅ|t|ᵅ)."""

    kind: Literal["alpha_stable"] = "alpha_stable"
    alpha: float = Field(gt=0.0, le=2.0, description="Characteristic exponent α")
    dispersion: float = Field(gt=0.0, description="Dispersion γ")

    @property
    def effective_variance(self) -> float:
        """2γ² for α = 2, infinite otherwise."""
        if self.alpha == 2.0:
            return 2.0 * self.dispersion**2
        return math.inf

    @property
    def finite_variance(self) -> bool:
        """Only the Gaussian member (α = 2) has finite variance."""
        return self.alpha == 2.0


NoiseModel = Annotated[
    GaussianNoise | ContaminatedGaussianNoise | AlphaStableNoise,
    Field(discriminator="kind"),
]


def resolve_noise(
    model: GaussianNoise | ContaminatedGaussianNoise | AlphaStableNoise,
    signal_power: float,
    scale: float = 1.0,
) -> GaussianNoise | ContaminatedGaussianNoise | AlphaStableNoise:
    """Return a concrete model for one node.

    Args:
        model: Declared noise model
        signal_power: σ_u²‖w_iᵒ‖², the clean-signal power used by ``snr_db``
        scale: Per-node multiplier applied to the Gaussian variances

    Returns:
        A model whose variances are all set
    """
    if isinstance(model, GaussianNoise):
        variance = (
            signal_power * 10.0 ** (-model.snr_db / 10.0)
            if model.snr_db is not None
            else model.effective_variance
        )
        return model.model_copy(update={"variance": variance * scale, "snr_db": None})
    if isinstance(model, ContaminatedGaussianNoise):
        sigma_v2 = (
            signal_power * 10.0 ** (-model.snr_db / 10.0)
            if model.snr_db is not None
            else model.sigma_v2
        )
        assert sigma_v2 is not None
        sigma_g2 = (
            model.sigma_g2_ratio * sigma_v2
            if model.sigma_g2_ratio is not None
            else model.impulse_variance
        )
        return model.model_copy(
            update={
                "sigma_v2": sigma_v2 * scale,
                "sigma_g2": sigma_g2 * scale,
                "sigma_g2_ratio": None,
                "snr_db": None,
            },
        )
    return model
