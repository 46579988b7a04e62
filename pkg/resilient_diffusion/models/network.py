"""Topology document and topology source declarations."""

from __future__ import annotations

from typing import Annotated, Literal

from pydantic import BaseModel, ConfigDict, Field


class TopologyDocument(BaseModel):
    """Structured topology document (reference encoding: JSON).

    ``edges`` lists unordered pairs once each. Documents that list every
    edge in both directions set ``symmetric_listing``; for those, a pair
    without its mirror is rejected as asymmetric.
    """

    model_config = ConfigDict(extra="forbid")

    nodes: int = Field(ge=1, description="Node count P")
    edges: list[tuple[int, int]] = Field(default_factory=list, description="Edge pairs [j, i]")
    clusters: dict[str, str] = Field(description="Node id -> cluster label")
    byzantine: list[int] = Field(default_factory=list, description="Byzantine node ids")
    ideal_states: dict[str, list[float]] = Field(
        default_factory=dict,
        description="Cluster label -> ideal state vector",
    )
    positions: dict[str, tuple[float, float]] | None = Field(
        default=None,
        description="Optional node id -> planar position",
    )
    symmetric_listing: bool = Field(
        default=False,
        description="Edges are listed in both directions",
    )


class InlineTopology(TopologyDocument):
    """A topology document embedded in the experiment config."""

    kind: Literal["inline"] = "inline"


class FileTopology(BaseModel):
    """A topology document stored in a separate JSON file."""

    model_config = ConfigDict(extra="forbid")

    kind: Literal["file"] = "file"
    path: str = Field(min_length=1, description="Path to the topology JSON document")


class _GeneratedTopology(BaseModel):
    model_config = ConfigDict(extra="forbid")

    cluster_labels: tuple[str, str] = Field(
        default=("A", "B"),
        description="Labels for the two geometric halves",
    )
    byzantine: list[int] = Field(default_factory=list, description="Explicit Byzantine ids")


class GridTopology(_GeneratedTopology):
    """Four-neighbour lattice split into left/right clusters."""

    kind: Literal["grid"] = "grid"
    rows: int = Field(ge=1)
    cols: int = Field(ge=1)


class RingTopology(_GeneratedTopology):
    """Ring with the two clusters occupying contiguous halves."""

    kind: Literal["ring"] = "ring"
    nodes: int = Field(ge=1)


class RandomGeometricTopology(_GeneratedTopology):
    """Connected random geometric graph on the unit square, split at x = 0.5."""

    kind: Literal["random_geometric"] = "random_geometric"
    nodes: int = Field(ge=1)
    radius: float = Field(gt=0.0, description="Connection radius")
    seed: int | None = Field(default=None, ge=0, description="Generator seed (defaults to config seed)")
    byzantine_count: int = Field(default=0, ge=0, description="Byzantine nodes to place at random")
    max_byzantine_neighbors: int = Field(
        default=1,
        ge=1,
        description="Placement keeps every normal node F-local for this F",
    )
    max_attempts: int = Field(default=200, ge=1)


TopologySource = Annotated[
    InlineTopology | FileTopology | GridTopology | RingTopology | RandomGeometricTopology,
    Field(discriminator="kind"),
]
