"""Adaptive combination weights, cost-contribution removal and the combination step.

Matrices are dense (P, P) arrays indexed ``[j, i]``: sender ``j``, receiver
``i``. The scalar functions evaluate one node or one pair; the ``*_all``
functions evaluate every pair at once and are what the engine runs.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping
from dataclasses import dataclass

import numpy as np

from resilient_diffusion.exceptions import ValidationError


@dataclass
class CombineState:
    """Combination memory of every directed neighbor pair.

    Attributes:
        gamma_sq: γ²_{j,i}, strictly positive on active pairs
        q_estimate: Running estimate of Q_i(ψ_j)
        weights: a_{j,i} from the latest combination
        removed: Pairs in R_i from the latest combination
        forgetting: ν_i per receiver
        q_smoothing: ρ applied to the Q estimate
        removal_count: F
        gamma_floor: Lower bound on γ²
        rank_own: Whether a node's own contribution competes for removal
    """

    gamma_sq: np.ndarray
    q_estimate: np.ndarray
    weights: np.ndarray
    removed: np.ndarray
    forgetting: np.ndarray
    q_smoothing: float = 0.0
    removal_count: int = 1
    gamma_floor: float = 1e-12
    rank_own: bool = False

    @classmethod
    def initial(
        cls,
        adjacency: np.ndarray,
        forgetting: np.ndarray | float,
        q_smoothing: float = 0.0,
        removal_count: int = 1,
        gamma_sq_init: float = 1.0,
        gamma_floor: float = 1e-12,
        rank_own: bool = False,
    ) -> CombineState:
        """Uniform γ²(0) and uniform initial weights over each neighborhood."""
        num_nodes = adjacency.shape[0]
        nu = np.broadcast_to(np.asarray(forgetting, dtype=float), (num_nodes,)).copy()
        if np.any((nu <= 0.0) | (nu > 1.0)):
            raise ValidationError("forgetting factors must lie in (0, 1]", field="forgetting")
        if not 0.0 <= q_smoothing < 1.0:
            raise ValidationError("q_smoothing must lie in [0, 1)", field="q_smoothing")
        if removal_count < 0:
            raise ValidationError("removal count must be non-negative", field="removal_count")
        gamma_sq = np.full((num_nodes, num_nodes), float(gamma_sq_init))
        no_removal = np.zeros((num_nodes, num_nodes), dtype=bool)
        return cls(
            gamma_sq=gamma_sq,
            q_estimate=np.zeros((num_nodes, num_nodes)),
            weights=combination_weights_all(gamma_sq, adjacency),
            removed=no_removal,
            forgetting=nu,
            q_smoothing=q_smoothing,
            removal_count=removal_count,
            gamma_floor=gamma_floor,
            rank_own=rank_own,
        )

    def removal_set(self, i: int) -> set[int]:
        """R_i from the latest combination."""
        return {int(j) for j in np.flatnonzero(self.removed[:, i])}


def update_gamma(
    state: CombineState,
    i: int,
    j: int,
    psi_j: np.ndarray,
    w_i: np.ndarray,
) -> CombineState:
    """γ²_{j,i} ← (1−ν_i)γ²_{j,i} + ν_i‖ψ_j − w_i‖², floored at ``gamma_floor``."""
    nu = state.forgetting[i]
    distance = float(np.sum(np.square(np.asarray(psi_j) - np.asarray(w_i))))
    updated = (1.0 - nu) * state.gamma_sq[j, i] + nu * distance
    state.gamma_sq[j, i] = max(updated, state.gamma_floor)
    return state


def cost_contribution(
    state: CombineState,
    i: int,
    j: int,
    d_next: float | np.ndarray,
    u_next: np.ndarray,
    psi_j: np.ndarray,
) -> float:
    """Update the Q estimate of pair (j, i) and return c_{j,i} = γ⁻⁴ Q.

    ``d_next``/``u_next`` are node i's next observation; a block of K pairs
    is passed as a (K,) vector and a (K, M) matrix and averaged.
    """
    d = np.atleast_1d(np.asarray(d_next, dtype=float))
    u = np.atleast_2d(np.asarray(u_next, dtype=float))
    q_inst = float(np.mean(np.square(d - u @ np.asarray(psi_j, dtype=float))))
    rho = state.q_smoothing
    state.q_estimate[j, i] = (1.0 - rho) * q_inst + rho * state.q_estimate[j, i]
    return float(state.q_estimate[j, i] / state.gamma_sq[j, i] ** 2)


def removal_set(
    contributions: Mapping[int, float],
    F: int,
    own_id: int | None = None,
    rank_own: bool = False,
) -> set[int]:
    """The min(F, |N_i|−1) largest neighbor contributions, ties to the lowest node id.

    ``contributions`` covers all of N_i, own node included. The own node
    ``own_id`` always survives unless ``rank_own`` lets it compete like any
    other neighbor.
    """
    if F < 0:
        raise ValidationError("F must be non-negative", field="F")
    if own_id is not None and contributions and own_id not in contributions:
        raise ValidationError(f"node {own_id} missing from its own neighborhood", field="own_id")
    count = min(F, len(contributions) - 1)
    if count <= 0:
        return set()
    candidates = [
        (node, value) for node, value in contributions.items() if rank_own or node != own_id
    ]
    ranked = sorted(candidates, key=lambda item: (-item[1], item[0]))
    return {node for node, _ in ranked[:count]}


def combination_weights(state: CombineState, i: int, survivors: Iterable[int]) -> dict[int, float]:
    """a_{j,i} ∝ γ⁻²_{j,i} over the survivors, summing to one.

    Raises:
        ValidationError: if ``survivors`` is empty
    """
    nodes = sorted(set(survivors))
    if not nodes:
        raise ValidationError(f"node {i} has no surviving neighbors", field="survivors")
    inverse = {j: 1.0 / state.gamma_sq[j, i] for j in nodes}
    total = sum(inverse.values())
    return {j: value / total for j, value in inverse.items()}


def combine_step(i: int, weights: Mapping[int, float], psis: Mapping[int, np.ndarray]) -> np.ndarray:
    """w_i = Σ_j a_{j,i} ψ_j over the support of ``weights``."""
    support = sorted(j for j, a in weights.items() if a != 0.0)
    if not support:
        raise ValidationError(f"node {i} has an empty weight support", field="weights")
    vectors = [np.asarray(psis[j], dtype=float) for j in support]
    if len({v.shape for v in vectors}) != 1:
        raise ValidationError("intermediate estimates differ in dimension", field="psis")
    return np.sum([weights[j] * v for j, v in zip(support, vectors, strict=True)], axis=0)


# Vectorized forms


def update_gamma_all(
    gamma_sq: np.ndarray,
    distance_sq: np.ndarray,
    forgetting: np.ndarray,
    active: np.ndarray,
    floor: float,
) -> np.ndarray:
    """Apply :func:`update_gamma` to every active pair."""
    updated = np.maximum((1.0 - forgetting) * gamma_sq + forgetting * distance_sq, floor)
    return np.where(active, updated, gamma_sq)


def cost_contributions_all(
    q_estimate: np.ndarray,
    prediction_sq: np.ndarray,
    q_smoothing: float,
    gamma_sq: np.ndarray,
    active: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Return the updated Q estimates and c_{j,i} for every active pair.

    Inactive pairs keep their Q estimate and get a NaN contribution.
    """
    q_new = np.where(active, (1.0 - q_smoothing) * prediction_sq + q_smoothing * q_estimate, q_estimate)
    contributions = np.where(active, q_new / np.square(gamma_sq), np.nan)
    return q_new, contributions


def removal_mask(
    contributions: np.ndarray,
    active: np.ndarray,
    F: int,
    rank_own: bool = False,
) -> np.ndarray:
    """Vectorized :func:`removal_set`: a boolean (P, P) mask of removed pairs.

    Every receiver is assumed active on its own diagonal entry.
    """
    num_nodes = contributions.shape[0]
    if F == 0:
        return np.zeros_like(active, dtype=bool)
    # Rows are receivers from here on.
    act = active.T
    candidates = act if rank_own else act & ~np.eye(num_nodes, dtype=bool)
    key = np.where(candidates, -contributions.T, np.inf)
    senders = np.broadcast_to(np.arange(num_nodes), (num_nodes, num_nodes))
    order = np.lexsort((senders, key), axis=-1)
    ranks = np.empty_like(order)
    np.put_along_axis(ranks, order, senders, axis=1)
    count = np.clip(np.minimum(F, act.sum(axis=1) - 1), 0, None)
    return (candidates & (ranks < count[:, None])).T


def combination_weights_all(gamma_sq: np.ndarray, survivors: np.ndarray) -> np.ndarray:
    """Vectorized :func:`combination_weights`; columns without survivors are zero."""
    inverse = np.where(survivors, 1.0 / gamma_sq, 0.0)
    totals = inverse.sum(axis=0)
    safe = np.where(totals > 0.0, totals, 1.0)
    return inverse / safe[None, :]


def combine_all(weights: np.ndarray, messages: np.ndarray) -> np.ndarray:
    """w_i = Σ_j a_{j,i} m_{j,i} for a (P, P, M) message tensor."""
    return np.einsum("ji,jim->im", weights, messages)
