"""Synchronous adapt-then-combine iteration over a whole network.

One call to :func:`run_iteration` advances every node by one iteration:
normal nodes adapt on their own data and Byzantine nodes fabricate
per-target messages (phase one), then every normal node updates its
combination memory, drops extreme contributions for resilient kinds and
combines (phase two). Phase two only reads phase-one results.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from resilient_diffusion.exceptions import DivergenceError, ValidationError
from resilient_diffusion.models.enums import AlgorithmKind
from resilient_diffusion.scenarios import DataBlock, Scenario
from resilient_diffusion.signals import BLOCK_SIZE, RngStream
from resilient_diffusion.topology import Topology

from .adapt import adapt_all
from .attack import AttackPlan
from .combine import (
    CombineState,
    combination_weights_all,
    combine_all,
    cost_contributions_all,
    removal_mask,
    update_gamma_all,
)


class ObservationBuffer:
    """Per-run observations for all normal nodes, drawn one block at a time.

    Blocks are generated in order so tapped-delay regressors carry across
    block boundaries; at most two blocks are kept.
    """

    def __init__(
        self,
        scenario: Scenario,
        topology: Topology,
        seed: int,
        run: int,
        block_size: int = BLOCK_SIZE,
    ) -> None:
        """Initialize the buffer.

        Args:
            scenario: Data model
            topology: Network whose normal nodes draw data
            seed: Experiment root seed
            run: Run index, the first element of every substream path
            block_size: Iterations per substream block
        """
        self.scenario = scenario
        self.topology = topology
        self.block_size = block_size
        self._streams = {node: RngStream(seed, (run, node)) for node in topology.normal_nodes}
        self._carry: dict[int, np.ndarray | None] = dict.fromkeys(topology.normal_nodes)
        self._blocks: dict[int, tuple[np.ndarray, np.ndarray]] = {}
        self._next_block = 0

    def _generate(self, block: int) -> tuple[np.ndarray, np.ndarray]:
        num_nodes = self.topology.num_nodes
        draws: dict[int, DataBlock] = {}
        for node in self.topology.normal_nodes:
            draws[node] = self.scenario.draw_block(
                node, self._streams[node], block, self.block_size, self._carry[node]
            )
            self._carry[node] = draws[node].carry
        sample = next(iter(draws.values()))
        d = np.zeros((num_nodes, *sample.d.shape))
        u = np.zeros((num_nodes, *sample.u.shape))
        for node, drawn in draws.items():
            d[node] = drawn.d
            u[node] = drawn.u
        return d, u

    def get(self, t: int) -> tuple[np.ndarray, np.ndarray]:
        """Observations at iteration ``t``: d of shape (P, K), u of shape (P, K, M)."""
        block, offset = divmod(t, self.block_size)
        while self._next_block <= block:
            self._blocks[self._next_block] = self._generate(self._next_block)
            self._blocks.pop(self._next_block - 2, None)
            self._next_block += 1
        if block not in self._blocks:
            raise ValidationError(f"iteration {t} is no longer buffered", field="t")
        d, u = self._blocks[block]
        return d[:, offset], u[:, offset if u.shape[1] > 1 else 0]


@dataclass(frozen=True)
class NetworkSetup:
    """Everything an iteration needs that does not change during a run.

    Per-node arrays are zero on Byzantine rows.
    """

    topology: Topology
    scenario: Scenario
    step_size: np.ndarray
    gm_lambda: float
    forgetting: np.ndarray
    q_smoothing: float = 0.0
    removal_count: int = 1
    gamma_sq_init: float = 1.0
    gamma_floor: float = 1e-12
    rank_own: bool = False
    attack: AttackPlan | None = None
    divergence_threshold: float = 1e6

    def __post_init__(self) -> None:
        normal = ~self.topology.byzantine_mask
        if np.any(self.step_size[normal] <= 0.0):
            raise ValidationError("step sizes must be positive", field="step_size")
        object.__setattr__(self, "step_size", np.where(normal, self.step_size, 0.0))
        object.__setattr__(self, "forgetting", np.where(normal, self.forgetting, 0.0))

    def active_pairs(self, iteration: int) -> np.ndarray:
        """(P, P) mask of pairs (j, i) whose messages node i combines at ``iteration``.

        Receivers are normal nodes; Byzantine senders count only while they
        attack that receiver.
        """
        normal = ~self.topology.byzantine_mask
        senders = np.broadcast_to(normal[:, None], self.topology.adjacency.shape)
        if self.attack is not None and iteration >= self.attack.start_iteration:
            senders = senders | self.attack.mask
        return self.topology.adjacency & senders & normal[None, :]


@dataclass
class World:
    """Mutable state of one run."""

    setup: NetworkSetup
    observations: ObservationBuffer
    w: np.ndarray
    psi: np.ndarray
    combine: CombineState
    iteration: int = 0

    @classmethod
    def start(
        cls,
        setup: NetworkSetup,
        seed: int,
        run: int,
        initial_estimate: np.ndarray | None = None,
    ) -> World:
        """Initial world: w_i(0) for normal nodes, zeros for Byzantine rows."""
        topology = setup.topology
        dimension = setup.scenario.dimension
        w0 = np.zeros(dimension) if initial_estimate is None else np.asarray(initial_estimate, dtype=float)
        if w0.shape != (dimension,):
            raise ValidationError(
                f"initial estimate has shape {w0.shape}, expected ({dimension},)",
                field="initial_estimate",
            )
        w = np.where(topology.byzantine_mask[:, None], 0.0, w0[None, :])
        combine = CombineState.initial(
            setup.active_pairs(0),
            np.where(setup.forgetting > 0.0, setup.forgetting, 1.0),
            q_smoothing=setup.q_smoothing,
            removal_count=setup.removal_count,
            gamma_sq_init=setup.gamma_sq_init,
            gamma_floor=setup.gamma_floor,
            rank_own=setup.rank_own,
        )
        combine.forgetting = setup.forgetting.copy()
        return cls(
            setup=setup,
            observations=ObservationBuffer(setup.scenario, topology, seed, run),
            w=w,
            psi=w.copy(),
            combine=combine,
        )


def _check_divergence(w: np.ndarray, normal: np.ndarray, threshold: float, iteration: int) -> None:
    norms = np.linalg.norm(w, axis=1)
    bad = normal & ~(np.isfinite(norms) & (norms <= threshold))
    if np.any(bad):
        node = int(np.flatnonzero(bad)[0])
        raise DivergenceError(
            "estimate is not finite or exceeds the divergence threshold",
            node=node,
            iteration=iteration,
        )


def run_iteration(kind: AlgorithmKind, world: World) -> World:
    """Advance ``world`` by one synchronous iteration of ``kind``.

    Raises:
        DivergenceError: if a normal node's estimate is non-finite or its
            norm exceeds the divergence threshold
    """
    setup = world.setup
    topology = setup.topology
    normal = ~topology.byzantine_mask
    t = world.iteration
    d, u = world.observations.get(t)

    psi = adapt_all(
        world.w,
        d,
        u,
        setup.step_size,
        kind.kernel,
        setup.gm_lambda,
        setup.scenario.block_mode,
    )
    _check_divergence(psi, normal, np.inf, t + 1)

    state = world.combine
    if not kind.cooperative:
        w_new = psi
        state.weights = np.diag(normal.astype(float))
        state.removed = np.zeros_like(state.removed)
    else:
        active = setup.active_pairs(t)
        num_nodes, dimension = psi.shape
        messages = np.broadcast_to(psi[:, None, :], (num_nodes, num_nodes, dimension))
        if setup.attack is not None and t >= setup.attack.start_iteration:
            fabricated = setup.attack.messages(world.w)
            messages = np.where(setup.attack.mask[:, :, None], fabricated, messages)
        distance_sq = np.sum(np.square(messages - world.w[None, :, :]), axis=2)
        state.gamma_sq = update_gamma_all(
            state.gamma_sq, distance_sq, state.forgetting, active, state.gamma_floor
        )
        if kind.resilient:
            d_next, u_next = world.observations.get(t + 1)
            prediction = d_next[None, :, :] - np.einsum("ikm,jim->jik", u_next, messages)
            state.q_estimate, contributions = cost_contributions_all(
                state.q_estimate,
                np.mean(np.square(prediction), axis=2),
                state.q_smoothing,
                state.gamma_sq,
                active,
            )
            state.removed = removal_mask(
                contributions, active, state.removal_count, state.rank_own
            )
        else:
            state.removed = np.zeros_like(active)
        state.weights = combination_weights_all(state.gamma_sq, active & ~state.removed)
        w_new = combine_all(state.weights, messages)

    _check_divergence(w_new, normal, setup.divergence_threshold, t + 1)
    world.psi = psi
    world.w = w_new
    world.iteration = t + 1
    return world
