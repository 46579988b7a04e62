"""Tests for adaptive weights, contribution removal and combination."""

from __future__ import annotations

import numpy as np
import pytest

from resilient_diffusion.algorithms.combine import (
    CombineState,
    combination_weights,
    combination_weights_all,
    combine_all,
    combine_step,
    cost_contribution,
    cost_contributions_all,
    removal_mask,
    removal_set,
    update_gamma,
    update_gamma_all,
)
from resilient_diffusion.exceptions import ValidationError


@pytest.fixture
def state(line3):
    return CombineState.initial(line3.adjacency, forgetting=0.1, removal_count=1)


class TestCombineState:
    """Tests for CombineState initialization."""

    def test_uniform_initial_weights(self, state, line3):
        assert np.allclose(state.weights[:, 1], [1 / 3, 1 / 3, 1 / 3])
        assert np.allclose(state.weights[:, 0], [0.5, 0.5, 0.0])
        assert np.allclose(state.weights.sum(axis=0), 1.0)
        assert not state.removed.any()

    @pytest.mark.parametrize("nu", [0.0, -0.1, 1.5])
    def test_rejects_forgetting(self, line3, nu):
        with pytest.raises(ValidationError):
            CombineState.initial(line3.adjacency, forgetting=nu)

    def test_rejects_smoothing(self, line3):
        with pytest.raises(ValidationError):
            CombineState.initial(line3.adjacency, forgetting=0.1, q_smoothing=1.0)

    def test_rejects_negative_removal(self, line3):
        with pytest.raises(ValidationError):
            CombineState.initial(line3.adjacency, forgetting=0.1, removal_count=-1)


class TestUpdateGamma:
    """Tests for the γ² recursion."""

    def test_formula(self, state):
        update_gamma(state, 1, 0, np.array([2.0, 0.0]), np.zeros(2))
        assert state.gamma_sq[0, 1] == pytest.approx(0.9 * 1.0 + 0.1 * 4.0)

    def test_floor(self, line3):
        state = CombineState.initial(line3.adjacency, forgetting=1.0, gamma_floor=1e-6)
        update_gamma(state, 0, 0, np.ones(2), np.ones(2))
        assert state.gamma_sq[0, 0] == 1e-6

    def test_vectorized_matches_scalar(self, line3):
        rng = np.random.default_rng(1)
        gamma = rng.uniform(0.1, 2.0, (3, 3))
        distance = rng.uniform(0.0, 1.0, (3, 3))
        nu = np.array([0.1, 0.2, 0.3])
        active = line3.adjacency
        updated = update_gamma_all(gamma, distance, nu, active, 1e-12)
        for j, i in zip(*np.nonzero(active), strict=True):
            assert updated[j, i] == pytest.approx((1 - nu[i]) * gamma[j, i] + nu[i] * distance[j, i])
        assert updated[0, 2] == gamma[0, 2]


class TestCostContribution:
    """Tests for c_{j,i} = Q/γ⁴."""

    def test_value(self, state):
        state.gamma_sq[0, 1] = 2.0
        c = cost_contribution(state, 1, 0, 1.0, np.array([1.0, 0.0]), np.zeros(2))
        assert c == pytest.approx(1.0 / 4.0)
        assert state.q_estimate[0, 1] == pytest.approx(1.0)

    def test_smoothing(self, line3):
        state = CombineState.initial(line3.adjacency, forgetting=0.1, q_smoothing=0.5)
        state.q_estimate[0, 1] = 3.0
        cost_contribution(state, 1, 0, 1.0, np.array([1.0, 0.0]), np.zeros(2))
        assert state.q_estimate[0, 1] == pytest.approx(0.5 * 1.0 + 0.5 * 3.0)

    def test_block_average(self, state):
        d = np.array([1.0, 3.0])
        u = np.array([[1.0, 0.0], [0.0, 1.0]])
        c = cost_contribution(state, 1, 1, d, u, np.zeros(2))
        assert c == pytest.approx((1.0 + 9.0) / 2)

    def test_vectorized_inactive_nan(self, line3):
        gamma = np.ones((3, 3))
        q, c = cost_contributions_all(np.zeros((3, 3)), np.full((3, 3), 2.0), 0.0, gamma, line3.adjacency)
        assert np.isnan(c[0, 2])
        assert c[0, 1] == pytest.approx(2.0)
        assert q[0, 2] == 0.0


class TestRemovalSet:
    """Tests for the removal of extreme contributions."""

    def test_largest_removed(self):
        assert removal_set({0: 1.0, 1: 5.0, 2: 3.0}, 1, own_id=0) == {1}

    def test_ties_to_lowest_id(self):
        assert removal_set({0: 1.0, 1: 3.0, 2: 3.0}, 1) == {1}
        assert removal_set({4: 2.0, 2: 2.0, 7: 2.0}, 2) == {2, 4}

    def test_count_capped_to_keep_one(self):
        assert len(removal_set({0: 1.0, 1: 2.0, 2: 3.0}, 5)) == 2

    def test_own_node_survives(self):
        assert removal_set({0: 9.0, 1: 1.0}, 1, own_id=0) == {1}
        assert removal_set({0: 9.0, 1: 1.0, 2: 2.0}, 5, own_id=0) == {1, 2}

    def test_own_node_competes_when_ranked(self):
        assert removal_set({0: 9.0, 1: 1.0}, 1, own_id=0, rank_own=True) == {0}

    def test_empty_cases(self):
        assert removal_set({0: 1.0}, 3, own_id=0) == set()
        assert removal_set({0: 1.0, 1: 2.0}, 0) == set()

    def test_rejects_negative_F(self):
        with pytest.raises(ValidationError):
            removal_set({0: 1.0}, -1)

    def test_rejects_missing_own(self):
        with pytest.raises(ValidationError):
            removal_set({1: 1.0, 2: 2.0}, 1, own_id=0)

    @pytest.mark.parametrize("rank_own", [False, True])
    @pytest.mark.parametrize("F", [0, 1, 2, 4])
    def test_mask_matches_scalar(self, ring6, F, rank_own):
        rng = np.random.default_rng(F)
        # Rounded draws produce ties.
        contributions = np.round(rng.uniform(0.0, 3.0, (6, 6)))
        active = ring6.adjacency
        mask = removal_mask(contributions, active, F, rank_own)
        for i in range(6):
            hood = {j: float(contributions[j, i]) for j in ring6.neighbors(i)}
            expected = removal_set(hood, F, own_id=i, rank_own=rank_own)
            assert set(np.flatnonzero(mask[:, i]).tolist()) == expected
        assert not (mask & ~active).any()

    def test_mask_keeps_own_node(self, ring6):
        contributions = np.ones((6, 6))
        np.fill_diagonal(contributions, 100.0)
        mask = removal_mask(contributions, ring6.adjacency, 1)
        assert not mask.diagonal().any()
        assert (mask.sum(axis=0) == 1).all()


class TestCombinationWeights:
    """Tests for a_{j,i} ∝ γ⁻²."""

    def test_inverse_proportional(self, state):
        state.gamma_sq[0, 1] = 1.0
        state.gamma_sq[1, 1] = 0.5
        state.gamma_sq[2, 1] = 0.25
        weights = combination_weights(state, 1, [0, 1, 2])
        assert weights == pytest.approx({0: 1 / 7, 1: 2 / 7, 2: 4 / 7})
        assert sum(weights.values()) == pytest.approx(1.0)

    def test_empty_survivors(self, state):
        with pytest.raises(ValidationError):
            combination_weights(state, 1, [])

    def test_vectorized_columns_sum_to_one(self, ring6):
        rng = np.random.default_rng(3)
        gamma = rng.uniform(0.01, 1.0, (6, 6))
        survivors = ring6.adjacency.copy()
        survivors[0, 1] = False
        weights = combination_weights_all(gamma, survivors)
        assert np.allclose(weights.sum(axis=0), 1.0)
        assert weights[0, 1] == 0.0
        assert (weights[~survivors] == 0.0).all()

    def test_vectorized_empty_column(self):
        survivors = np.array([[True, False], [False, False]])
        weights = combination_weights_all(np.ones((2, 2)), survivors)
        assert weights[:, 1].tolist() == [0.0, 0.0]


class TestCombineStep:
    """Tests for the convex combination."""

    def test_weighted_sum(self):
        psis = {0: np.array([1.0, 0.0]), 1: np.array([0.0, 1.0]), 2: np.array([5.0, 5.0])}
        w = combine_step(1, {0: 0.25, 1: 0.75, 2: 0.0}, psis)
        assert np.allclose(w, [0.25, 0.75])

    def test_empty_support(self):
        with pytest.raises(ValidationError):
            combine_step(0, {0: 0.0}, {0: np.zeros(2)})

    def test_dimension_mismatch(self):
        with pytest.raises(ValidationError):
            combine_step(0, {0: 0.5, 1: 0.5}, {0: np.zeros(2), 1: np.zeros(3)})

    def test_vectorized_matches_scalar(self, line3):
        rng = np.random.default_rng(4)
        weights = combination_weights_all(rng.uniform(0.1, 1.0, (3, 3)), line3.adjacency)
        messages = rng.standard_normal((3, 3, 2))
        combined = combine_all(weights, messages)
        for i in range(3):
            column = {j: float(weights[j, i]) for j in range(3)}
            expected = combine_step(i, column, {j: messages[j, i] for j in range(3)})
            assert np.allclose(combined[i], expected)
