"""Multi-task network graph: clusters, Byzantine membership and neighborhoods.

A :class:`Topology` is immutable and can be shared read-only by parallel
Monte-Carlo runs. Edges are stored once as ``(min, max)`` pairs; the
neighborhood of a node always includes the node itself.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import networkx as nx
import numpy as np
import orjson
from pydantic import ValidationError as PydanticValidationError

from .exceptions import SchemaError, ValidationError
from .models.network import (
    GridTopology,
    InlineTopology,
    RandomGeometricTopology,
    RingTopology,
    TopologyDocument,
    TopologySource,
)
from .signals import Channel, RngStream

Edge = tuple[int, int]


def _normalize_edge(j: int, i: int) -> Edge:
    return (j, i) if j < i else (i, j)


@dataclass(frozen=True)
class Topology:
    """Undirected network with cluster labels and Byzantine flags.

    Attributes:
        num_nodes: Node count P
        edges: Unordered edges as ``(min, max)`` pairs, no self-edges
        clusters: Cluster label of every node, indexed by node id
        byzantine: Byzantine node ids
        positions: Optional planar position of every node
    """

    num_nodes: int
    edges: frozenset[Edge]
    clusters: tuple[str, ...]
    byzantine: frozenset[int] = frozenset()
    positions: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self) -> None:
        if self.num_nodes < 1:
            raise ValidationError("topology needs at least one node", field="num_nodes")
        if len(self.clusters) != self.num_nodes:
            raise ValidationError("every node needs a cluster label", field="clusters")
        if self.positions is not None and len(self.positions) != self.num_nodes:
            raise ValidationError("every node needs a position", field="positions")
        normalized = frozenset(_normalize_edge(j, i) for j, i in self.edges)
        for j, i in normalized:
            if j == i:
                raise ValidationError(f"self-edge on node {j}", field="edges")
            if not (0 <= j < self.num_nodes and 0 <= i < self.num_nodes):
                raise ValidationError(f"edge ({j}, {i}) references a missing node", field="edges")
        if any(not 0 <= k < self.num_nodes for k in self.byzantine):
            raise ValidationError("Byzantine id out of range", field="byzantine")
        object.__setattr__(self, "edges", normalized)

    @cached_property
    def adjacency(self) -> np.ndarray:
        """Boolean (P, P) adjacency matrix including self-loops."""
        adj = np.eye(self.num_nodes, dtype=bool)
        for j, i in self.edges:
            adj[j, i] = adj[i, j] = True
        adj.flags.writeable = False
        return adj

    def neighbors(self, i: int) -> list[int]:
        """Return N_i in ascending order, including i itself.

        Raises:
            ValidationError: if ``i`` is not a node of this topology
        """
        if not 0 <= i < self.num_nodes:
            raise ValidationError(f"node {i} out of range [0, {self.num_nodes})", field="i")
        return np.flatnonzero(self.adjacency[:, i]).tolist()

    @cached_property
    def byzantine_mask(self) -> np.ndarray:
        """Boolean (P,) mask of Byzantine nodes."""
        mask = np.zeros(self.num_nodes, dtype=bool)
        mask[list(self.byzantine)] = True
        mask.flags.writeable = False
        return mask

    @cached_property
    def normal_nodes(self) -> tuple[int, ...]:
        """Normal node ids in ascending order."""
        return tuple(int(k) for k in np.flatnonzero(~self.byzantine_mask))

    @cached_property
    def attacked_nodes(self) -> tuple[int, ...]:
        """Normal nodes with at least one Byzantine neighbor."""
        adj = self.adjacency[self.byzantine_mask]
        hit = adj.any(axis=0) & ~self.byzantine_mask
        return tuple(int(k) for k in np.flatnonzero(hit))

    @cached_property
    def cluster_labels(self) -> tuple[str, ...]:
        """Distinct cluster labels, sorted."""
        return tuple(sorted(set(self.clusters)))

    @cached_property
    def cluster_index(self) -> np.ndarray:
        """Dense cluster index per node, following :attr:`cluster_labels`."""
        lookup = {label: k for k, label in enumerate(self.cluster_labels)}
        return np.array([lookup[label] for label in self.clusters], dtype=np.intp)

    def max_byzantine_neighbors(self) -> int:
        """Largest Byzantine-neighbor count over normal nodes (the F of F-locality)."""
        if not self.byzantine or not self.normal_nodes:
            return 0
        counts = self.adjacency[self.byzantine_mask].sum(axis=0)
        return int(counts[~self.byzantine_mask].max())

    def to_networkx(self) -> nx.Graph:
        """Return a networkx graph with ``cluster``/``byzantine`` node attributes."""
        graph = nx.Graph()
        for node in range(self.num_nodes):
            attrs: dict[str, Any] = {
                "cluster": self.clusters[node],
                "byzantine": node in self.byzantine,
            }
            if self.positions is not None:
                attrs["pos"] = self.positions[node]
            graph.add_node(node, **attrs)
        graph.add_edges_from(sorted(self.edges))
        return graph

    def to_document(self, ideal_states: IdealStates | None = None) -> TopologyDocument:
        """Serialize into the external topology document."""
        return TopologyDocument(
            nodes=self.num_nodes,
            edges=sorted(self.edges),
            clusters={str(k): label for k, label in enumerate(self.clusters)},
            byzantine=sorted(self.byzantine),
            ideal_states=ideal_states.to_lists() if ideal_states is not None else {},
            positions=(
                {str(k): pos for k, pos in enumerate(self.positions)}
                if self.positions is not None
                else None
            ),
        )


@dataclass(frozen=True)
class IdealStates:
    """Per-cluster ideal state vectors wᵒ, all of dimension M."""

    per_cluster_state: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        states = {
            label: np.asarray(vector, dtype=float).reshape(-1)
            for label, vector in self.per_cluster_state.items()
        }
        if len({v.shape[0] for v in states.values()}) > 1:
            raise ValidationError("ideal states must share one dimension", field="ideal_states")
        object.__setattr__(self, "per_cluster_state", states)

    @property
    def dimension(self) -> int:
        """State dimension M (0 when no state is declared)."""
        for vector in self.per_cluster_state.values():
            return int(vector.shape[0])
        return 0

    def node_matrix(self, topology: Topology) -> np.ndarray:
        """Return the (P, M) matrix of per-node ideal states.

        Byzantine rows are NaN; metrics never read them.

        Raises:
            ValidationError: if a normal node's cluster has no ideal state
        """
        matrix = np.full((topology.num_nodes, self.dimension), np.nan)
        for node in topology.normal_nodes:
            label = topology.clusters[node]
            if label not in self.per_cluster_state:
                raise ValidationError(
                    f"cluster {label!r} of node {node} has no ideal state",
                    field="ideal_states",
                )
            matrix[node] = self.per_cluster_state[label]
        return matrix

    def to_lists(self) -> dict[str, list[float]]:
        """Plain-list form for JSON documents."""
        return {label: v.tolist() for label, v in sorted(self.per_cluster_state.items())}


def neighbors(topo: Topology, i: int) -> list[int]:
    """Return N_i, sorted ascending and including ``i``."""
    return topo.neighbors(i)


def _format_location(loc: tuple[int | str, ...]) -> str:
    parts: list[str] = []
    for item in loc:
        if isinstance(item, int):
            parts.append(f"[{item}]")
        else:
            parts.append(f".{item}" if parts else item)
    return "".join(parts)


def read_topology_document(path: str | Path) -> TopologyDocument:
    """Read and schema-check a topology document.

    Raises:
        SchemaError: if the file is unreadable, not JSON or malformed
    """
    source = Path(path)
    try:
        raw = orjson.loads(source.read_bytes())
    except OSError as exc:
        raise SchemaError(f"cannot read topology document: {exc}", location=str(source)) from exc
    except orjson.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON: {exc}", location=str(source)) from exc
    return _validate_document(raw)


def _validate_document(raw: Any) -> TopologyDocument:
    if isinstance(raw, TopologyDocument):
        return raw
    try:
        return TopologyDocument.model_validate(raw)
    except PydanticValidationError as exc:
        first = exc.errors()[0]
        raise SchemaError(first["msg"], location=_format_location(first["loc"])) from exc


def _node_key(key: str, num_nodes: int, location: str) -> int:
    try:
        node = int(key)
    except ValueError as exc:
        raise SchemaError(f"node key {key!r} is not an integer", location=location) from exc
    if not 0 <= node < num_nodes:
        raise SchemaError(f"node {node} out of range [0, {num_nodes})", location=location)
    return node


def load_topology(source: TopologyDocument | Mapping[str, Any] | str | Path) -> Topology:
    """Validate a topology document and build a :class:`Topology`.

    Args:
        source: A parsed document, a raw mapping, or a path to a JSON file

    Returns:
        The validated topology

    Raises:
        SchemaError: on self-edges, out-of-range or duplicate edges,
            asymmetric listings, missing or unknown cluster references
    """
    if isinstance(source, (str, Path)):
        document = read_topology_document(source)
    else:
        document = _validate_document(source)

    n = document.nodes
    seen: dict[Edge, int] = {}
    directed: set[Edge] = set()
    for k, (j, i) in enumerate(document.edges):
        location = f"edges[{k}]"
        if j == i:
            raise SchemaError(f"self-edge on node {j}", location=location)
        if not (0 <= j < n and 0 <= i < n):
            raise SchemaError(f"edge [{j}, {i}] references a missing node", location=location)
        if document.symmetric_listing:
            if (j, i) in directed:
                raise SchemaError(f"duplicate edge [{j}, {i}]", location=location)
            directed.add((j, i))
            continue
        pair = _normalize_edge(j, i)
        if pair in seen:
            raise SchemaError(
                f"duplicate edge [{j}, {i}] (first listed at edges[{seen[pair]}])",
                location=location,
            )
        seen[pair] = k
    if document.symmetric_listing:
        for k, (j, i) in enumerate(document.edges):
            if (i, j) not in directed:
                raise SchemaError(f"edge [{j}, {i}] has no mirror [{i}, {j}]", location=f"edges[{k}]")

    labels: dict[int, str] = {}
    for key, label in document.clusters.items():
        labels[_node_key(key, n, f"clusters.{key}")] = label
    missing = [node for node in range(n) if node not in labels]
    if missing:
        raise SchemaError(f"nodes without a cluster: {missing}", location="clusters")

    for k, node in enumerate(document.byzantine):
        if not 0 <= node < n:
            raise SchemaError(f"Byzantine node {node} out of range", location=f"byzantine[{k}]")
    if len(set(document.byzantine)) != len(document.byzantine):
        raise SchemaError("duplicate Byzantine node", location="byzantine")

    known = set(labels.values())
    for label in document.ideal_states:
        if label not in known:
            raise SchemaError(f"unknown cluster {label!r}", location=f"ideal_states.{label}")
    _check_ideal_dimensions(document.ideal_states)

    positions = None
    if document.positions is not None:
        coords = {
            _node_key(key, n, f"positions.{key}"): pos for key, pos in document.positions.items()
        }
        if len(coords) != n:
            raise SchemaError("positions must cover every node", location="positions")
        positions = tuple(tuple(map(float, coords[node])) for node in range(n))

    if document.symmetric_listing:
        edge_set = frozenset(_normalize_edge(j, i) for j, i in directed)
    else:
        edge_set = frozenset(seen)
    return Topology(
        num_nodes=n,
        edges=edge_set,
        clusters=tuple(labels[node] for node in range(n)),
        byzantine=frozenset(document.byzantine),
        positions=positions,  # type: ignore[arg-type]
    )


def _check_ideal_dimensions(states: Mapping[str, list[float]]) -> None:
    dimension: int | None = None
    for label, vector in states.items():
        if not vector:
            raise SchemaError("ideal state is empty", location=f"ideal_states.{label}")
        if dimension is None:
            dimension = len(vector)
        elif len(vector) != dimension:
            raise SchemaError(
                f"ideal state has dimension {len(vector)}, expected {dimension}",
                location=f"ideal_states.{label}",
            )


def load_ideal_states(
    states: Mapping[str, Iterable[float]],
    topology: Topology | None = None,
) -> IdealStates:
    """Build :class:`IdealStates`, checking labels against ``topology`` when given.

    Raises:
        SchemaError: on unknown cluster labels or mismatched dimensions
    """
    as_lists = {label: list(vector) for label, vector in states.items()}
    if topology is not None:
        for label in as_lists:
            if label not in topology.cluster_labels:
                raise SchemaError(f"unknown cluster {label!r}", location=f"ideal_states.{label}")
    _check_ideal_dimensions(as_lists)
    return IdealStates({label: np.asarray(v, dtype=float) for label, v in as_lists.items()})


def prune_edges(topo: Topology, cut: Iterable[Edge]) -> Topology:
    """Return a copy of ``topo`` without the edges in ``cut``.

    Pairs are unordered; cutting a non-edge is a no-op.
    """
    removed = {_normalize_edge(j, i) for j, i in cut}
    return Topology(
        num_nodes=topo.num_nodes,
        edges=topo.edges - removed,
        clusters=topo.clusters,
        byzantine=topo.byzantine,
        positions=topo.positions,
    )


def byzantine_edges(topo: Topology) -> set[Edge]:
    """Edges with at least one Byzantine endpoint."""
    return {(j, i) for j, i in topo.edges if j in topo.byzantine or i in topo.byzantine}


# Generators


def line_topology(
    num_nodes: int,
    clusters: Iterable[str] | None = None,
    byzantine: Iterable[int] = (),
) -> Topology:
    """Path graph 0–1–…–(P−1); one cluster ``"A"`` unless labels are given."""
    labels = tuple(clusters) if clusters is not None else ("A",) * num_nodes
    return Topology(
        num_nodes=num_nodes,
        edges=frozenset((k, k + 1) for k in range(num_nodes - 1)),
        clusters=labels,
        byzantine=frozenset(byzantine),
        positions=tuple((k / max(num_nodes - 1, 1), 0.0) for k in range(num_nodes)),
    )


def ring_topology(
    num_nodes: int,
    cluster_labels: tuple[str, str] = ("A", "B"),
    byzantine: Iterable[int] = (),
) -> Topology:
    """Ring whose first half belongs to the first cluster, the rest to the second."""
    if num_nodes < 1:
        raise ValidationError("ring needs at least one node", field="nodes")
    edges = {_normalize_edge(k, (k + 1) % num_nodes) for k in range(num_nodes)} if num_nodes > 1 else set()
    half = num_nodes // 2
    angles = 2.0 * np.pi * np.arange(num_nodes) / num_nodes
    return Topology(
        num_nodes=num_nodes,
        edges=frozenset(edges),
        clusters=tuple(cluster_labels[0] if k < half else cluster_labels[1] for k in range(num_nodes)),
        byzantine=frozenset(byzantine),
        positions=tuple(
            (0.5 + 0.5 * float(np.cos(a)), 0.5 + 0.5 * float(np.sin(a))) for a in angles
        ),
    )


def grid_topology(
    rows: int,
    cols: int,
    cluster_labels: tuple[str, str] = ("A", "B"),
    byzantine: Iterable[int] = (),
) -> Topology:
    """Four-neighbour lattice with row-major ids ``r * cols + c``.

    Columns ``c < cols // 2`` form the first cluster. Positions span the
    unit square.
    """
    if rows < 1 or cols < 1:
        raise ValidationError("grid needs at least one row and one column", field="rows")
    lattice = nx.grid_2d_graph(rows, cols)
    edges = frozenset(
        _normalize_edge(r1 * cols + c1, r2 * cols + c2) for (r1, c1), (r2, c2) in lattice.edges()
    )
    split = cols // 2
    return Topology(
        num_nodes=rows * cols,
        edges=edges,
        clusters=tuple(
            cluster_labels[0] if node % cols < split else cluster_labels[1]
            for node in range(rows * cols)
        ),
        byzantine=frozenset(byzantine),
        positions=tuple(
            (
                (node % cols) / max(cols - 1, 1),
                (node // cols) / max(rows - 1, 1),
            )
            for node in range(rows * cols)
        ),
    )


def place_byzantine(
    topo: Topology,
    count: int,
    max_neighbors: int,
    stream: RngStream,
    max_attempts: int = 200,
) -> Topology:
    """Mark ``count`` random nodes Byzantine keeping the network F-local.

    Raises:
        ValidationError: if no admissible placement is found within ``max_attempts``
    """
    if count == 0:
        return topo
    if count >= topo.num_nodes:
        raise ValidationError("Byzantine count must leave normal nodes", field="byzantine_count")
    rng = stream.generator
    for _ in range(max_attempts):
        chosen = frozenset(int(k) for k in rng.choice(topo.num_nodes, size=count, replace=False))
        candidate = Topology(
            num_nodes=topo.num_nodes,
            edges=topo.edges,
            clusters=topo.clusters,
            byzantine=chosen,
            positions=topo.positions,
        )
        if candidate.max_byzantine_neighbors() <= max_neighbors:
            return candidate
    raise ValidationError(
        f"no {max_neighbors}-local placement of {count} Byzantine nodes in {max_attempts} attempts",
        field="byzantine_count",
    )


def random_geometric_topology(
    num_nodes: int,
    radius: float,
    stream: RngStream,
    cluster_labels: tuple[str, str] = ("A", "B"),
    byzantine: Iterable[int] = (),
    byzantine_count: int = 0,
    max_byzantine_neighbors: int = 1,
    max_attempts: int = 200,
) -> Topology:
    """Connected random geometric graph on the unit square.

    Disconnected samples are rejected and redrawn from the next derived seed.
    Nodes left of x = 0.5 form the first cluster.

    Raises:
        ValidationError: if no connected sample is drawn within ``max_attempts``
    """
    for attempt in range(max_attempts):
        seed = int(stream.child(attempt).generator.integers(2**32))
        graph = nx.random_geometric_graph(num_nodes, radius, seed=seed)
        if num_nodes > 1 and not nx.is_connected(graph):
            continue
        pos = nx.get_node_attributes(graph, "pos")
        positions = tuple((float(pos[k][0]), float(pos[k][1])) for k in range(num_nodes))
        topo = Topology(
            num_nodes=num_nodes,
            edges=frozenset(_normalize_edge(j, i) for j, i in graph.edges()),
            clusters=tuple(
                cluster_labels[0] if x < 0.5 else cluster_labels[1] for x, _ in positions
            ),
            byzantine=frozenset(byzantine),
            positions=positions,
        )
        return place_byzantine(
            topo,
            byzantine_count,
            max_byzantine_neighbors,
            stream.child(max_attempts + attempt),
            max_attempts=max_attempts,
        )
    raise ValidationError(
        f"no connected graph with radius {radius} in {max_attempts} attempts",
        field="radius",
    )


def build_topology(source: TopologySource, seed: int) -> tuple[Topology, IdealStates]:
    """Materialize any topology source declared in an experiment config.

    Generated topologies carry no ideal states; the config supplies them.
    """
    if isinstance(source, GridTopology):
        return grid_topology(source.rows, source.cols, source.cluster_labels, source.byzantine), IdealStates()
    if isinstance(source, RingTopology):
        return ring_topology(source.nodes, source.cluster_labels, source.byzantine), IdealStates()
    if isinstance(source, RandomGeometricTopology):
        stream = RngStream(source.seed if source.seed is not None else seed, (int(Channel.TOPOLOGY),))
        topo = random_geometric_topology(
            source.nodes,
            source.radius,
            stream,
            cluster_labels=source.cluster_labels,
            byzantine=source.byzantine,
            byzantine_count=source.byzantine_count,
            max_byzantine_neighbors=source.max_byzantine_neighbors,
            max_attempts=source.max_attempts,
        )
        return topo, IdealStates()
    document: TopologyDocument
    if isinstance(source, InlineTopology):
        document = TopologyDocument.model_validate(source.model_dump(exclude={"kind"}))
    else:
        document = read_topology_document(source.path)
    topo = load_topology(document)
    return topo, load_ideal_states(document.ideal_states, topo)
