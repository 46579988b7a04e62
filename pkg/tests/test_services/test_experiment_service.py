"""Tests for Monte-Carlo orchestration and metric aggregation."""

from __future__ import annotations

from unittest.mock import MagicMock

import numpy as np
import pytest

from resilient_diffusion.exceptions import ValidationError
from resilient_diffusion.models import parse_experiment_config
from resilient_diffusion.models.enums import AlgorithmKind
from resilient_diffusion.services import (
    ExperimentService,
    prepare_experiment,
    simulate_run,
    subnetwork_partition,
)
from resilient_diffusion.services.experiment_service import recorded_iterations
from resilient_diffusion.topology import line_topology, ring_topology


@pytest.fixture
def service():
    return ExperimentService(n_jobs=1, backend="sequential")


class TestRecordedIterations:
    """Tests for the recording schedule."""

    def test_every_iteration(self):
        assert recorded_iterations(3, 1).tolist() == [0, 1, 2, 3]

    def test_stride_keeps_last(self):
        assert recorded_iterations(10, 4).tolist() == [0, 4, 8, 10]

    def test_zero_iterations(self):
        assert recorded_iterations(0, 5).tolist() == [0]


class TestPrepareExperiment:
    """Tests for materializing an experiment."""

    def test_resolves_config(self, generic_config):
        prepared = prepare_experiment(generic_config)
        assert prepared.config.combine.gamma_floor == 1e-12
        assert prepared.topology.num_nodes == 6
        assert prepared.ideal.shape == (6, 2)

    def test_attacked_nodes(self, attacked_config):
        prepared = prepare_experiment(attacked_config)
        assert prepared.attacked_nodes == (1, 3)

    def test_setup_per_node_steps(self, generic_config_data):
        generic_config_data["adapt"]["step_size"] = {str(k): 0.01 * (k + 1) for k in range(6)}
        prepared = prepare_experiment(parse_experiment_config(generic_config_data))
        setup = prepared.setup(AlgorithmKind.DLMG)
        assert setup.step_size[5] == pytest.approx(0.06)
        assert setup.removal_count == 1


class TestRunExperiment:
    """Tests for running and aggregating Monte-Carlo runs."""

    def test_shapes(self, service, generic_config):
        trace = service.run_experiment(generic_config)
        assert trace.algorithm == AlgorithmKind.RDLMG
        assert trace.iterations.tolist() == list(range(41))
        assert trace.msd_per_node.shape == (41, 6)
        assert trace.msd_network.shape == (41,)
        assert trace.mean_estimates.shape == (41, 6, 2)
        assert trace.runs == 2
        assert trace.completed_runs == 2
        assert trace.final_msd_db == pytest.approx(float(trace.msd_network[-1]))

    def test_deterministic(self, service, generic_config):
        first = service.run_experiment(generic_config)
        second = service.run_experiment(generic_config)
        assert np.array_equal(first.msd_per_node, second.msd_per_node)
        assert np.array_equal(first.final_weights, second.final_weights)

    def test_threading_matches_sequential(self, service, generic_config):
        serial = service.run_experiment(generic_config)
        threaded = ExperimentService(n_jobs=2, backend="threading").run_experiment(generic_config)
        assert np.array_equal(serial.msd_per_node, threaded.msd_per_node)
        assert np.array_equal(serial.mean_estimates, threaded.mean_estimates)

    def test_seed_changes_results(self, service, generic_config_data):
        first = service.run_experiment(parse_experiment_config(generic_config_data))
        generic_config_data["seed"] = 8
        second = service.run_experiment(parse_experiment_config(generic_config_data))
        assert not np.array_equal(first.msd_per_node, second.msd_per_node)

    def test_msd_decreases(self, service, generic_config_data):
        generic_config_data["iterations"] = 300
        trace = service.run_experiment(parse_experiment_config(generic_config_data))
        assert trace.msd_network[-1] < trace.msd_network[0] - 10.0

    def test_initial_msd(self, service, generic_config_data):
        generic_config_data["iterations"] = 0
        trace = service.run_experiment(parse_experiment_config(generic_config_data))
        assert trace.iterations.tolist() == [0]
        # w(0) = 0, so the deviation is the mean of ‖wᵒ‖².
        assert trace.msd_network[0] == pytest.approx(10.0 * np.log10((0.05 + 1.13) / 2))

    def test_network_msd_weights_subnetworks(self, service, attacked_config):
        trace = service.run_experiment(attacked_config)
        sizes = np.array([len(members) for members in trace.subnetworks])
        pooled = trace.msd_subnetwork @ sizes / sizes.sum()
        assert np.allclose(10.0 ** (trace.msd_network / 10.0), pooled)
        assert sorted(k for members in trace.subnetworks for k in members) == [0, 1, 3, 4, 5]

    def test_byzantine_columns_excluded(self, service, attacked_config):
        trace = service.run_experiment(attacked_config)
        assert np.isnan(trace.msd_per_node[:, 2]).all()
        assert np.isfinite(trace.msd_network).all()
        assert trace.attacked_nodes == (1, 3)
        assert trace.attacked_distance.shape == (41, 2)
        assert np.isnan(trace.mean_estimates[:, 2]).all()

    def test_msd_every(self, service, generic_config_data):
        generic_config_data["trace"] = {"msd_every": 15, "record_estimates": False}
        trace = service.run_experiment(parse_experiment_config(generic_config_data))
        assert trace.iterations.tolist() == [0, 15, 30, 40]
        assert trace.mean_estimates is None

    def test_divergent_runs_excluded(self, service, generic_config_data):
        generic_config_data["adapt"]["step_size"] = 50.0
        generic_config_data["algorithms"] = ["dlms"]
        trace = service.run_experiment(parse_experiment_config(generic_config_data))
        assert [record.run for record in trace.divergent_runs] == [0, 1]
        assert trace.completed_runs == 0
        assert trace.msd_network.size == 0
        assert trace.final_msd_db is None

    def test_run_all(self, service, generic_config_data):
        generic_config_data["algorithms"] = ["nc_lmg", "rdlmg"]
        traces = service.run_all(parse_experiment_config(generic_config_data))
        assert list(traces) == [AlgorithmKind.NC_LMG, AlgorithmKind.RDLMG]

    def test_logs_summary(self, generic_config):
        logger = MagicMock()
        ExperimentService(logger=logger, n_jobs=1).run_experiment(generic_config)
        messages = [call.args[0] for call in logger.info.call_args_list]
        assert messages[0] == "Starting experiment"
        assert "Experiment completed" in messages
        assert logger.debug.call_count == 2


class TestSimulateRun:
    """Tests for a single run record."""

    def test_record(self, generic_config):
        prepared = prepare_experiment(generic_config)
        record = simulate_run(prepared, AlgorithmKind.RDLMG, 1)
        assert record.run == 1
        assert record.divergence is None
        assert record.squared_deviation.shape == (41, 6)
        assert np.allclose(record.final_weights.sum(axis=0), 1.0)

    def test_snapshots(self, generic_config_data):
        generic_config_data["trace"] = {"snapshot_iterations": [5, 99]}
        prepared = prepare_experiment(parse_experiment_config(generic_config_data))
        record = simulate_run(prepared, AlgorithmKind.RDLMG, 0)
        assert list(record.snapshots) == [5]


class TestSubnetworks:
    """Tests for the sub-network partition."""

    def test_all_connected(self, ring6):
        weights = ring6.adjacency / ring6.adjacency.sum(axis=0)
        assert subnetwork_partition(weights, ring6, 1e-3) == [(0, 1, 2, 3, 4, 5)]

    def test_cut_edge(self, ring6):
        weights = ring6.adjacency / ring6.adjacency.sum(axis=0)
        for j, i in [(2, 3), (5, 0)]:
            weights[j, i] = weights[i, j] = 0.0
        assert subnetwork_partition(weights, ring6, 1e-3) == [(0, 1, 2), (3, 4, 5)]

    def test_one_direction_suffices(self):
        line = line_topology(2)
        weights = np.array([[1.0, 0.5], [0.0, 0.5]])
        assert subnetwork_partition(weights, line, 1e-3) == [(0, 1)]

    def test_byzantine_excluded(self):
        topology = ring_topology(4, byzantine=[1])
        weights = np.full((4, 4), 0.5)
        components = subnetwork_partition(weights, topology, 1e-3)
        assert components == [(0, 2, 3)]


class TestSnapshot:
    """Tests for the topology snapshot of a trace."""

    def test_final(self, service, generic_config):
        snapshot = service.run_experiment(generic_config).snapshot()
        assert snapshot.iteration == 40
        assert snapshot.num_nodes == 6
        assert snapshot.clusters["0"] == "A"
        assert sorted(k for c in snapshot.components for k in c) == list(range(6))

    def test_requested_iteration(self, service, generic_config_data):
        generic_config_data["trace"] = {"snapshot_iterations": [5]}
        trace = service.run_experiment(parse_experiment_config(generic_config_data))
        assert trace.snapshot(5).iteration == 5

    def test_missing_iteration(self, service, generic_config):
        trace = service.run_experiment(generic_config)
        with pytest.raises(ValidationError) as exc_info:
            trace.snapshot(7)
        assert exc_info.value.field == "iteration"
