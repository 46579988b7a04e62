"""Tests for the synchronous network iteration."""

from __future__ import annotations

import numpy as np
import pytest

from resilient_diffusion.algorithms.combine import (
    CombineState,
    combination_weights,
    combine_step,
    cost_contribution,
    removal_set,
    update_gamma,
)
from resilient_diffusion.algorithms.engine import World, run_iteration
from resilient_diffusion.exceptions import DivergenceError
from resilient_diffusion.models import parse_experiment_config
from resilient_diffusion.models.enums import AlgorithmKind
from resilient_diffusion.services import prepare_experiment
from resilient_diffusion.topology import prune_edges


def _run(setup, kind, iterations, seed=7, run=0):
    world = World.start(setup, seed, run)
    for _ in range(iterations):
        run_iteration(kind, world)
    return world


class TestRunIteration:
    """Tests for one synchronous adapt-then-combine iteration."""

    @pytest.mark.parametrize("kind", list(AlgorithmKind))
    def test_weights_are_convex(self, generic_config, kind):
        prepared = prepare_experiment(generic_config)
        world = _run(prepared.setup(kind), kind, 5)
        weights = world.combine.weights
        assert np.allclose(weights.sum(axis=0), 1.0)
        assert (weights >= 0.0).all()
        assert not (weights[~prepared.topology.adjacency] != 0.0).any()

    def test_deterministic(self, generic_config):
        prepared = prepare_experiment(generic_config)
        setup = prepared.setup(AlgorithmKind.RDLMG)
        first = _run(setup, AlgorithmKind.RDLMG, 20)
        second = _run(setup, AlgorithmKind.RDLMG, 20)
        assert np.array_equal(first.w, second.w)

    def test_runs_differ(self, generic_config):
        setup = prepare_experiment(generic_config).setup(AlgorithmKind.DLMS)
        assert not np.array_equal(
            _run(setup, AlgorithmKind.DLMS, 5, run=0).w,
            _run(setup, AlgorithmKind.DLMS, 5, run=1).w,
        )

    def test_iteration_counter(self, generic_config):
        setup = prepare_experiment(generic_config).setup(AlgorithmKind.DLMG)
        assert _run(setup, AlgorithmKind.DLMG, 3).iteration == 3

    @pytest.mark.parametrize(
        ("nc", "cooperative"),
        [(AlgorithmKind.NC_LMS, AlgorithmKind.DLMS), (AlgorithmKind.NC_LMG, AlgorithmKind.DLMG)],
    )
    def test_non_cooperative_equals_pruned_network(self, generic_config, nc, cooperative):
        """Without neighbors, cooperative kinds reduce to the non-cooperative ones."""
        prepared = prepare_experiment(generic_config)
        isolated = prune_edges(prepared.topology, prepared.topology.edges)
        pruned_setup = prepared.setup(cooperative)
        pruned_setup = type(pruned_setup)(
            **{**pruned_setup.__dict__, "topology": isolated},
        )
        alone = _run(pruned_setup, cooperative, 15)
        non_cooperative = _run(prepared.setup(nc), nc, 15)
        assert np.allclose(alone.w, non_cooperative.w)

    @pytest.mark.parametrize(
        ("resilient", "plain"),
        [(AlgorithmKind.RDLMG, AlgorithmKind.DLMG), (AlgorithmKind.RDLMS, AlgorithmKind.DLMS)],
    )
    def test_no_removal_equals_plain_diffusion(self, generic_config_data, resilient, plain):
        generic_config_data["combine"]["removal_count"] = 0
        prepared = prepare_experiment(parse_experiment_config(generic_config_data))
        a = _run(prepared.setup(resilient), resilient, 15)
        b = _run(prepared.setup(plain), plain, 15)
        assert np.array_equal(a.w, b.w)
        assert np.array_equal(a.combine.weights, b.combine.weights)

    def test_removal_leaves_survivors(self, generic_config):
        prepared = prepare_experiment(generic_config)
        world = _run(prepared.setup(AlgorithmKind.RDLMG), AlgorithmKind.RDLMG, 10)
        # Ring nodes have three-node neighborhoods and F = 1.
        assert (world.combine.removed.sum(axis=0) == 1).all()
        assert np.allclose(world.combine.weights[world.combine.removed], 0.0)

    def test_own_node_kept(self, attacked_config):
        prepared = prepare_experiment(attacked_config)
        world = _run(prepared.setup(AlgorithmKind.RDLMG), AlgorithmKind.RDLMG, 60)
        normal = list(prepared.topology.normal_nodes)
        assert not world.combine.removed.diagonal().any()
        assert (world.combine.weights.diagonal()[normal] > 0.0).all()

    def test_rank_own_switch(self, generic_config_data):
        generic_config_data["combine"]["rank_own"] = True
        setup = prepare_experiment(parse_experiment_config(generic_config_data)).setup(AlgorithmKind.RDLMG)
        assert setup.rank_own
        world = _run(setup, AlgorithmKind.RDLMG, 5)
        assert world.combine.rank_own
        assert (world.combine.removed.sum(axis=0) == 1).all()

    def test_matches_scalar_primitives(self, generic_config):
        """One vectorized RDLMG iteration equals the per-node scalar recursion."""
        prepared = prepare_experiment(generic_config)
        setup = prepared.setup(AlgorithmKind.RDLMG)
        world = _run(setup, AlgorithmKind.RDLMG, 3)
        w_before = world.w.copy()
        gamma_before = world.combine.gamma_sq.copy()
        q_before = world.combine.q_estimate.copy()
        t = world.iteration

        run_iteration(AlgorithmKind.RDLMG, world)
        d_next, u_next = world.observations.get(t + 1)
        topology = prepared.topology
        for i in topology.normal_nodes:
            state = CombineState(
                gamma_sq=gamma_before.copy(),
                q_estimate=q_before.copy(),
                weights=np.zeros_like(gamma_before),
                removed=np.zeros_like(gamma_before, dtype=bool),
                forgetting=setup.forgetting,
                q_smoothing=setup.q_smoothing,
                removal_count=setup.removal_count,
                gamma_floor=setup.gamma_floor,
            )
            contributions = {}
            for j in topology.neighbors(i):
                update_gamma(state, i, j, world.psi[j], w_before[i])
                contributions[j] = cost_contribution(state, i, j, d_next[i], u_next[i], world.psi[j])
            removed = removal_set(contributions, setup.removal_count, own_id=i)
            survivors = [j for j in topology.neighbors(i) if j not in removed]
            weights = combination_weights(state, i, survivors)
            expected = combine_step(i, weights, {j: world.psi[j] for j in survivors})
            assert np.allclose(world.w[i], expected)
            assert world.combine.removal_set(i) == removed

    def test_divergence_detected(self, generic_config_data):
        generic_config_data["adapt"]["step_size"] = 50.0
        generic_config_data["algorithms"] = ["dlms"]
        prepared = prepare_experiment(parse_experiment_config(generic_config_data))
        world = World.start(prepared.setup(AlgorithmKind.DLMS), 7, 0)
        with pytest.raises(DivergenceError) as exc_info:
            for _ in range(1000):
                run_iteration(AlgorithmKind.DLMS, world)
        assert exc_info.value.node in prepared.topology.normal_nodes
        assert exc_info.value.iteration >= 1


class TestByzantineHandling:
    """Tests for Byzantine senders inside the iteration."""

    def test_byzantine_rows_never_estimate(self, attacked_config):
        prepared = prepare_experiment(attacked_config)
        world = _run(prepared.setup(AlgorithmKind.DLMG), AlgorithmKind.DLMG, 10)
        assert np.array_equal(world.w[2], [0.0, 0.0])
        assert np.allclose(world.combine.weights[:, 2], 0.0)

    def test_attackers_weighted_by_targets(self, attacked_config):
        prepared = prepare_experiment(attacked_config)
        world = _run(prepared.setup(AlgorithmKind.DLMG), AlgorithmKind.DLMG, 3)
        weights = world.combine.weights
        assert weights[2, 1] > 0.0
        assert weights[2, 3] > 0.0

    def test_silent_before_start(self, attacked_config_data):
        attacked_config_data["attack"]["start_iteration"] = 4
        prepared = prepare_experiment(parse_experiment_config(attacked_config_data))
        world = World.start(prepared.setup(AlgorithmKind.DLMG), 7, 0)
        for _ in range(4):
            run_iteration(AlgorithmKind.DLMG, world)
            assert world.combine.weights[2, 1] == 0.0
        run_iteration(AlgorithmKind.DLMG, world)
        assert world.combine.weights[2, 1] > 0.0

    def test_silent_without_attack(self, generic_config_data):
        generic_config_data["topology"]["byzantine"] = [2]
        prepared = prepare_experiment(parse_experiment_config(generic_config_data))
        assert prepared.attack is None
        assert prepared.attacked_nodes == ()
        world = _run(prepared.setup(AlgorithmKind.DLMG), AlgorithmKind.DLMG, 5)
        assert (world.combine.weights[2] == 0.0).all()
