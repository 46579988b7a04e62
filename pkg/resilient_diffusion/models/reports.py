"""Report and manifest models written next to simulation artifacts."""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel, ConfigDict, Field

from .enums import AlgorithmKind


class _ReportBase(BaseModel):
    model_config = ConfigDict(extra="forbid")


class DivergenceRecord(_ReportBase):
    """One divergent Monte-Carlo run."""

    run: int = Field(ge=0)
    iteration: int = Field(ge=0, description="Iteration at which divergence was detected")
    node: int = Field(ge=0, description="First offending node")


class NodeBound(_ReportBase):
    """Mean-stability step-size bound of one normal node."""

    node: int
    cluster: str
    step_size: float
    regressor_variance: float
    noise_variance: float
    expected_scale: float = Field(description="Steady-state E{f}")
    step_bound: float = Field(description="Largest mean-stable μ")
    within_bound: bool


class AlgorithmTheory(_ReportBase):
    """Steady-state prediction for one algorithm.

    MSD fields are ``None`` when the recursion is not mean-square stable.
    """

    algorithm: AlgorithmKind
    method: str
    stable: bool
    spectral_radius: float
    msd: float | None
    msd_db: float | None
    per_node_msd_db: dict[str, float | None]
    expected_scale: dict[str, float]
    step_bounds: dict[str, float]
    removal_sets: dict[str, list[int]]
    weights: list[list[float]] = Field(description="E{A(∞)} indexed [j][i] over node_ids")
    node_ids: list[int]


class TheoryReport(_ReportBase):
    """Theory output for every algorithm of an experiment."""

    name: str
    input_hash: str
    algorithms: list[AlgorithmTheory]


class TopologySnapshot(_ReportBase):
    """Edges alive in the run-averaged weights at one iteration."""

    algorithm: AlgorithmKind
    iteration: int
    threshold: float
    num_nodes: int
    edges: list[tuple[int, int]]
    components: list[list[int]] = Field(description="Connected sub-networks of normal nodes")
    isolated_byzantine: list[int]
    byzantine: list[int]
    clusters: dict[str, str]


class NodeProfileEntry(_ReportBase):
    """Per-node statistics drawn or resolved for an experiment."""

    cluster: str
    byzantine: bool
    regressor_variance: float | None
    noise_variance: float | None


class Manifest(_ReportBase):
    """Everything needed to reproduce one emitted trace."""

    version: str
    name: str
    algorithm: AlgorithmKind
    seed: int
    runs: int
    iterations: int
    input_hash: str
    config: dict[str, Any] = Field(description="Fully resolved experiment document")
    divergences: list[DivergenceRecord]
    attacked_nodes: list[int]
    subnetworks: list[list[int]]
    node_profile: dict[str, NodeProfileEntry]
    files: list[str]
