"""Monte-Carlo orchestration and metric aggregation."""

from __future__ import annotations

import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

import networkx as nx
import numpy as np
import structlog
from joblib import Parallel, delayed

from resilient_diffusion.algorithms.attack import AttackPlan, AttackSpec, build_attack
from resilient_diffusion.algorithms.engine import NetworkSetup, World, run_iteration
from resilient_diffusion.config import get_defaults, settings
from resilient_diffusion.exceptions import DivergenceError, ValidationError
from resilient_diffusion.logging_config import (
    log_divergence,
    log_experiment_summary,
    log_run_completed,
)
from resilient_diffusion.models.enums import AlgorithmKind
from resilient_diffusion.models.experiment import AttackConfig, ExperimentConfig
from resilient_diffusion.models.reports import DivergenceRecord, TopologySnapshot
from resilient_diffusion.scenarios import (
    Scenario,
    build_scenario,
    per_node_parameter,
    resolve_ideal_states,
)
from resilient_diffusion.topology import IdealStates, Topology, build_topology

if TYPE_CHECKING:
    from structlog.typing import FilteringBoundLogger


@dataclass(frozen=True)
class PreparedExperiment:
    """A resolved config materialized into the objects every run shares.

    Attributes:
        config: Resolved experiment document
        topology: Network
        ideal_states: wᵒ per cluster
        scenario: Data model
        attack: Resolved attack, None when Byzantine nodes stay silent
    """

    config: ExperimentConfig
    topology: Topology
    ideal_states: IdealStates
    scenario: Scenario
    attack: AttackSpec | None = None

    @property
    def ideal(self) -> np.ndarray:
        """(P, M) wᵒ per node; NaN rows for Byzantine nodes."""
        return self.scenario.ideal

    @property
    def attacked_nodes(self) -> tuple[int, ...]:
        """Normal nodes that receive fabricated messages."""
        if self.attack is None:
            return ()
        return tuple(
            i for i in self.topology.normal_nodes if self.attack.malicious_state_for(i) is not None
        )

    def setup(self, algorithm: AlgorithmKind) -> NetworkSetup:
        """Per-run constants for ``algorithm``."""
        config = self.config
        topology = self.topology
        attack = (
            AttackPlan.from_spec(self.attack, topology.num_nodes, self.scenario.dimension)
            if self.attack is not None
            else None
        )
        return NetworkSetup(
            topology=topology,
            scenario=self.scenario,
            step_size=per_node_parameter(config.adapt.step_size, topology, "adapt.step_size"),
            gm_lambda=float(config.adapt.gm_lambda or get_defaults().gm_lambda),
            forgetting=per_node_parameter(config.combine.forgetting, topology, "combine.forgetting"),
            q_smoothing=config.combine.q_smoothing,
            removal_count=config.combine.removal_count,
            rank_own=config.combine.rank_own,
            gamma_sq_init=float(config.combine.gamma_sq_init or get_defaults().gamma_sq_init),
            gamma_floor=float(config.combine.gamma_floor or get_defaults().gamma_floor),
            attack=attack,
            divergence_threshold=float(
                config.divergence_threshold or get_defaults().divergence_threshold
            ),
        )


def _resolve_attack(config: AttackConfig, topology: Topology, dimension: int) -> AttackSpec:
    overrides: dict[int, tuple[np.ndarray | dict[int, np.ndarray], float]] = {}
    for entry in config.overrides:
        state = entry.malicious_state
        if isinstance(state, dict):
            overrides[entry.node] = ({int(i): np.asarray(v, dtype=float) for i, v in state.items()}, entry.step)
        else:
            overrides[entry.node] = (np.asarray(state, dtype=float), entry.step)
    shared = (
        np.asarray(config.malicious_state, dtype=float)
        if config.malicious_state is not None
        else None
    )
    return build_attack(
        topology,
        dimension,
        shared,
        config.step,
        overrides=overrides,
        start_iteration=config.start_iteration,
    )


def prepare_experiment(config: ExperimentConfig) -> PreparedExperiment:
    """Resolve ``config`` and build its topology, scenario and attack.

    Raises:
        ConfigurationError: on inconsistent settings
        SchemaError: on invalid topology documents
        ValidationError: on attack declarations that do not fit the network
    """
    resolved = config.resolved()
    topology, declared = build_topology(resolved.topology, resolved.seed)
    ideal_states = resolve_ideal_states(resolved, topology, declared)
    scenario = build_scenario(resolved, topology, ideal_states)
    attack = (
        _resolve_attack(resolved.attack, topology, scenario.dimension)
        if resolved.attack is not None
        else None
    )
    return PreparedExperiment(
        config=resolved,
        topology=topology,
        ideal_states=ideal_states,
        scenario=scenario,
        attack=attack,
    )


def recorded_iterations(iterations: int, every: int) -> np.ndarray:
    """Iterations 0, k, 2k, ... and always the last one."""
    schedule = set(range(0, iterations + 1, every))
    schedule.add(iterations)
    return np.array(sorted(schedule), dtype=int)


@dataclass
class RunRecord:
    """Recorded outputs of one run.

    Arrays are indexed by recorded iteration first. ``divergence`` is set
    when the run stopped early; the arrays are then incomplete.
    """

    run: int
    squared_deviation: np.ndarray
    attacked_distance: np.ndarray
    estimates: np.ndarray | None
    final_weights: np.ndarray
    snapshots: dict[int, np.ndarray] = field(default_factory=dict)
    divergence: DivergenceRecord | None = None
    duration: float = 0.0


def simulate_run(
    prepared: PreparedExperiment,
    algorithm: AlgorithmKind,
    run: int,
) -> RunRecord:
    """Execute one seeded run of ``algorithm``; divergence ends the run."""
    started = time.perf_counter()
    config = prepared.config
    topology = prepared.topology
    schedule = recorded_iterations(config.iterations, config.trace.msd_every or 1)
    slots = {int(n): k for k, n in enumerate(schedule)}
    snapshot_at = {n for n in config.trace.snapshot_iterations if n <= config.iterations}
    attacked = list(prepared.attacked_nodes)
    malicious = (
        np.array([prepared.attack.malicious_state_for(i) for i in attacked])
        if prepared.attack is not None and attacked
        else np.zeros((0, prepared.scenario.dimension))
    )

    num_nodes, dimension = topology.num_nodes, prepared.scenario.dimension
    squared = np.full((schedule.size, num_nodes), np.nan)
    distance = np.full((schedule.size, len(attacked)), np.nan)
    estimates = (
        np.full((schedule.size, num_nodes, dimension), np.nan)
        if config.trace.record_estimates
        else None
    )
    snapshots: dict[int, np.ndarray] = {}

    initial = np.asarray(config.initial_estimate) if config.initial_estimate is not None else None
    world = World.start(prepared.setup(algorithm), config.seed, run, initial)

    def record(world: World) -> None:
        n = world.iteration
        if n in snapshot_at:
            snapshots[n] = world.combine.weights.copy()
        slot = slots.get(n)
        if slot is None:
            return
        squared[slot] = np.sum(np.square(world.w - prepared.ideal), axis=1)
        if attacked:
            distance[slot] = np.linalg.norm(world.w[attacked] - malicious, axis=1)
        if estimates is not None:
            estimates[slot] = np.where(topology.byzantine_mask[:, None], np.nan, world.w)

    divergence: DivergenceRecord | None = None
    record(world)
    try:
        for _ in range(config.iterations):
            world = run_iteration(algorithm, world)
            record(world)
    except DivergenceError as exc:
        exc.run = run
        divergence = DivergenceRecord(run=run, iteration=exc.iteration, node=exc.node)

    return RunRecord(
        run=run,
        squared_deviation=squared,
        attacked_distance=distance,
        estimates=estimates,
        final_weights=world.combine.weights.copy(),
        snapshots=snapshots,
        divergence=divergence,
        duration=time.perf_counter() - started,
    )


def subnetwork_partition(
    final_weights: np.ndarray,
    topology: Topology,
    threshold: float,
) -> list[tuple[int, ...]]:
    """Connected sub-networks of normal nodes under the alive edges.

    An edge survives when the average weight exceeds ``threshold`` in either
    direction. Components are sorted by their smallest node id.
    """
    graph = nx.Graph()
    graph.add_nodes_from(topology.normal_nodes)
    graph.add_edges_from(_alive_edges(final_weights, topology, threshold, normal_only=True))
    components = [tuple(sorted(component)) for component in nx.connected_components(graph)]
    return sorted(components)


def _alive_edges(
    weights: np.ndarray,
    topology: Topology,
    threshold: float,
    normal_only: bool = False,
) -> list[tuple[int, int]]:
    alive = []
    for j, i in sorted(topology.edges):
        if normal_only and (j in topology.byzantine or i in topology.byzantine):
            continue
        if weights[j, i] > threshold or weights[i, j] > threshold:
            alive.append((j, i))
    return alive


def isolated_byzantine(final_weights: np.ndarray, topology: Topology, threshold: float) -> list[int]:
    """Byzantine nodes none of whose edges carry weight above ``threshold``."""
    alive = _alive_edges(final_weights, topology, threshold)
    touched = {node for edge in alive for node in edge}
    return sorted(k for k in topology.byzantine if k not in touched)


@dataclass
class MetricsTrace:
    """Run-averaged metrics of one algorithm.

    Only runs that finished are averaged. With no finished run every
    per-iteration array is empty.

    Attributes:
        algorithm: Simulated algorithm
        topology: Network the runs used
        iterations: Recorded iteration numbers
        msd_per_node: (I, P) mean ‖w_i − wᵢᵒ‖², NaN on Byzantine columns
        msd_network: (I,) networked MSD in dB over normal nodes
        subnetworks: Components from :func:`subnetwork_partition`
        msd_subnetwork: (I, S) linear MSD per sub-network
        final_weights: (P, P) mean a_{j,i}(T)
        divergent_runs: Runs that stopped early
        attacked_nodes: Normal nodes receiving fabricated messages
        attacked_distance: (I, A) mean ‖w_i − wᵢᵃ‖ per attacked node
        mean_estimates: (I, P, M) mean w_i, or None when not recorded
        weight_snapshots: Mean weights at the requested iterations
        runs: Runs attempted
        edge_threshold: θ_edge used for the partition
        final_iteration: T
    """

    algorithm: AlgorithmKind
    topology: Topology
    iterations: np.ndarray
    msd_per_node: np.ndarray
    msd_network: np.ndarray
    subnetworks: list[tuple[int, ...]]
    msd_subnetwork: np.ndarray
    final_weights: np.ndarray
    divergent_runs: list[DivergenceRecord]
    attacked_nodes: tuple[int, ...]
    attacked_distance: np.ndarray
    mean_estimates: np.ndarray | None
    weight_snapshots: dict[int, np.ndarray]
    runs: int
    edge_threshold: float
    final_iteration: int

    @property
    def completed_runs(self) -> int:
        """Runs included in the averages."""
        return self.runs - len(self.divergent_runs)

    @property
    def final_msd_db(self) -> float | None:
        """Networked MSD at the last recorded iteration."""
        return float(self.msd_network[-1]) if self.msd_network.size else None

    def snapshot(self, iteration: int | None = None) -> TopologySnapshot:
        """Alive edges and sub-networks of the mean weights at ``iteration`` (default: T).

        Raises:
            ValidationError: if no weights were snapshotted at ``iteration``
        """
        label = self.final_iteration if iteration is None else iteration
        if label == self.final_iteration:
            weights = self.final_weights
        elif label in self.weight_snapshots:
            weights = self.weight_snapshots[label]
        else:
            raise ValidationError(f"no weight snapshot at iteration {label}", field="iteration")
        topology = self.topology
        components = subnetwork_partition(weights, topology, self.edge_threshold)
        return TopologySnapshot(
            algorithm=self.algorithm,
            iteration=label,
            threshold=self.edge_threshold,
            num_nodes=topology.num_nodes,
            edges=_alive_edges(weights, topology, self.edge_threshold),
            components=[list(component) for component in components],
            isolated_byzantine=isolated_byzantine(weights, topology, self.edge_threshold),
            byzantine=sorted(topology.byzantine),
            clusters={str(node): cluster for node, cluster in enumerate(topology.clusters)},
        )


def _mean(arrays: Sequence[np.ndarray], shape: tuple[int, ...]) -> np.ndarray:
    # Ordered reduction keeps results identical across execution layouts.
    if not arrays:
        return np.full(shape, np.nan)
    total = np.zeros(shape)
    for array in arrays:
        total = total + array
    return total / len(arrays)


def aggregate(
    prepared: PreparedExperiment,
    algorithm: AlgorithmKind,
    records: Sequence[RunRecord],
    edge_threshold: float | None = None,
) -> MetricsTrace:
    """Average run records (in run order) into a :class:`MetricsTrace`."""
    config = prepared.config
    topology = prepared.topology
    threshold = get_defaults().edge_threshold if edge_threshold is None else edge_threshold
    ordered = sorted(records, key=lambda record: record.run)
    finished = [record for record in ordered if record.divergence is None]
    divergent = [record.divergence for record in ordered if record.divergence is not None]

    schedule = recorded_iterations(config.iterations, config.trace.msd_every or 1)
    if not finished:
        schedule = schedule[:0]
    num_nodes = topology.num_nodes
    dimension = prepared.scenario.dimension
    attacked = prepared.attacked_nodes

    per_node = _mean([r.squared_deviation for r in finished], (schedule.size, num_nodes))
    final_weights = _mean([r.final_weights for r in finished], (num_nodes, num_nodes))
    distance = _mean([r.attacked_distance for r in finished], (schedule.size, len(attacked)))
    estimates = (
        _mean([r.estimates for r in finished if r.estimates is not None], (schedule.size, num_nodes, dimension))
        if config.trace.record_estimates
        else None
    )
    snapshots = {
        n: _mean([r.snapshots[n] for r in finished], (num_nodes, num_nodes))
        for n in sorted(n for n in config.trace.snapshot_iterations if n <= config.iterations)
    }

    normal = list(topology.normal_nodes)
    subnetworks = subnetwork_partition(final_weights, topology, threshold)
    msd_subnetwork = np.zeros((schedule.size, len(subnetworks)))
    for s, members in enumerate(subnetworks):
        msd_subnetwork[:, s] = per_node[:, list(members)].mean(axis=1)
    network = per_node[:, normal].mean(axis=1) if normal else np.zeros(schedule.size)

    return MetricsTrace(
        algorithm=algorithm,
        topology=topology,
        iterations=schedule,
        msd_per_node=per_node,
        msd_network=10.0 * np.log10(network),
        subnetworks=subnetworks,
        msd_subnetwork=msd_subnetwork,
        final_weights=final_weights,
        divergent_runs=[record for record in divergent if record is not None],
        attacked_nodes=attacked,
        attacked_distance=distance,
        mean_estimates=estimates,
        weight_snapshots=snapshots,
        runs=len(ordered),
        edge_threshold=threshold,
        final_iteration=config.iterations,
    )


class ExperimentService:
    """Runs experiments and aggregates their Monte-Carlo runs."""

    def __init__(
        self,
        logger: FilteringBoundLogger | None = None,
        n_jobs: int | None = None,
        backend: str | None = None,
    ) -> None:
        """Initialize experiment service.

        Args:
            logger: Optional logger instance
            n_jobs: Worker count, defaults to settings
            backend: joblib backend or ``sequential``, defaults to settings
        """
        self.logger = logger
        self.n_jobs = n_jobs or settings.n_jobs
        self.backend = backend or settings.parallel_backend

    def _execute(
        self,
        prepared: PreparedExperiment,
        algorithm: AlgorithmKind,
        runs: int,
    ) -> list[RunRecord]:
        if self.backend == "sequential" or self.n_jobs == 1:
            return [simulate_run(prepared, algorithm, run) for run in range(runs)]
        # Parallel returns results in submission order.
        records: list[RunRecord] = Parallel(n_jobs=self.n_jobs, backend=self.backend)(
            delayed(simulate_run)(prepared, algorithm, run) for run in range(runs)
        )
        return records

    def run_experiment(
        self,
        config: ExperimentConfig | PreparedExperiment,
        algorithm: AlgorithmKind | None = None,
    ) -> MetricsTrace:
        """Run R seeded runs of one algorithm and aggregate them.

        Args:
            config: Experiment, raw or already prepared
            algorithm: Algorithm to simulate, defaults to the config's first

        Returns:
            Run-averaged metrics; divergent runs are listed, not averaged
        """
        prepared = config if isinstance(config, PreparedExperiment) else prepare_experiment(config)
        resolved = prepared.config
        kind = algorithm or resolved.algorithms[0]
        runs = resolved.runs or get_defaults().runs
        started = time.perf_counter()
        with structlog.contextvars.bound_contextvars(experiment_id=resolved.name):
            if self.logger:
                self.logger.info(
                    "Starting experiment",
                    algorithm=kind.label,
                    runs=runs,
                    iterations=resolved.iterations,
                    nodes=prepared.topology.num_nodes,
                )
            records = self._execute(prepared, kind, runs)
            trace = aggregate(prepared, kind, records)
            if self.logger:
                for record in records:
                    if record.divergence is not None:
                        log_divergence(
                            self.logger,
                            record.run,
                            record.divergence.iteration,
                            record.divergence.node,
                        )
                    else:
                        log_run_completed(self.logger, record.run, resolved.iterations, record.duration)
                log_experiment_summary(
                    self.logger,
                    kind.label,
                    runs,
                    resolved.iterations,
                    len(trace.divergent_runs),
                    time.perf_counter() - started,
                    trace.final_msd_db,
                )
        return trace

    def run_all(self, config: ExperimentConfig) -> dict[AlgorithmKind, MetricsTrace]:
        """Run every algorithm the config lists on the same prepared experiment."""
        prepared = prepare_experiment(config)
        return {kind: self.run_experiment(prepared, kind) for kind in prepared.config.algorithms}
