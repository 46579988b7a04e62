"""Gradient-based Byzantine attack.

A Byzantine node k sends every targeted normal neighbor i a message one
small step from i's own estimate toward a malicious state:
ψ_k = w_i − μᵃ(w_i − wᵃ). The message is the closest candidate to w_i, so
adaptive weights favor it, and repeated steps drag w_i to wᵃ.
"""

from __future__ import annotations

import math
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from resilient_diffusion.exceptions import ValidationError
from resilient_diffusion.topology import Topology


@dataclass(frozen=True)
class AttackerSpec:
    """One Byzantine node's attack.

    Attributes:
        malicious_state: wᵃ per targeted node id
        step: μᵃ in (0, 1)
    """

    malicious_state: Mapping[int, np.ndarray]
    step: float = 0.01

    def __post_init__(self) -> None:
        if not 0.0 < self.step < 1.0:
            raise ValidationError("attack step must lie in (0, 1)", field="step")


@dataclass(frozen=True)
class AttackSpec:
    """Attacks of every Byzantine node and when they start."""

    attackers: Mapping[int, AttackerSpec] = field(default_factory=dict)
    start_iteration: int = 0

    def active(self, iteration: int) -> bool:
        """Whether Byzantine messages are sent at ``iteration``."""
        return bool(self.attackers) and iteration >= self.start_iteration

    def targets(self, k: int) -> list[int]:
        """Targets of Byzantine node ``k`` in ascending order."""
        attacker = self.attackers.get(k)
        return sorted(attacker.malicious_state) if attacker is not None else []

    def malicious_state_for(self, i: int) -> np.ndarray | None:
        """wᵃ aimed at normal node ``i`` by its lowest-id attacker, if any."""
        for k in sorted(self.attackers):
            state = self.attackers[k].malicious_state.get(i)
            if state is not None:
                return state
        return None


def build_attack(
    topology: Topology,
    dimension: int,
    shared_state: np.ndarray | None,
    shared_step: float,
    overrides: Mapping[int, tuple[np.ndarray | Mapping[int, np.ndarray], float]] | None = None,
    start_iteration: int = 0,
) -> AttackSpec:
    """Resolve per-target malicious states for every Byzantine node.

    Each Byzantine node targets all its normal neighbors with the shared
    state, unless ``overrides`` gives it its own state (one vector, or one
    vector per target, which also restricts the targets).

    Raises:
        ValidationError: on unknown attackers, non-neighbor targets or
            dimension mismatches
    """
    overrides = overrides or {}
    for k in overrides:
        if k not in topology.byzantine:
            raise ValidationError(f"node {k} is not Byzantine", field="attack.overrides")
    attackers: dict[int, AttackerSpec] = {}
    for k in sorted(topology.byzantine):
        normal_neighbors = [i for i in topology.neighbors(k) if i not in topology.byzantine]
        if k in overrides:
            state, step = overrides[k]
        elif shared_state is not None:
            state, step = shared_state, shared_step
        else:
            continue
        if isinstance(state, Mapping):
            per_target = {int(i): np.asarray(v, dtype=float) for i, v in state.items()}
            for i in per_target:
                if i not in normal_neighbors:
                    raise ValidationError(
                        f"node {i} is not a normal neighbor of Byzantine node {k}",
                        field="attack.overrides",
                    )
        else:
            vector = np.asarray(state, dtype=float)
            per_target = {i: vector for i in normal_neighbors}
        for vector in per_target.values():
            if vector.shape != (dimension,):
                raise ValidationError(
                    f"malicious state has shape {vector.shape}, expected ({dimension},)",
                    field="attack.malicious_state",
                )
        attackers[k] = AttackerSpec(malicious_state=per_target, step=step)
    return AttackSpec(attackers=attackers, start_iteration=start_iteration)


def fabricate_message(spec: AttackSpec, k: int, i: int, w_i_current: np.ndarray) -> np.ndarray:
    """ψ_k = w_i(n) − μᵃ(w_i(n) − wᵃ) for target ``i``.

    Raises:
        ValidationError: if ``i`` is not a target of ``k``
    """
    attacker = spec.attackers.get(k)
    if attacker is None or i not in attacker.malicious_state:
        raise ValidationError(f"node {i} is not a target of Byzantine node {k}", field="i")
    w_i = np.asarray(w_i_current, dtype=float)
    return w_i - attacker.step * (w_i - attacker.malicious_state[i])


def predicted_capture_time(mu_a: float, eps: float) -> int:
    """Smallest n with (1−μᵃ)ⁿ ≤ ε."""
    if not 0.0 < mu_a < 1.0:
        raise ValidationError("attack step must lie in (0, 1)", field="mu_a")
    if not 0.0 < eps <= 1.0:
        raise ValidationError("eps must lie in (0, 1]", field="eps")
    if eps == 1.0:
        return 0
    n = math.ceil(math.log(eps) / math.log1p(-mu_a))
    # Guard the ceiling against rounding on exact powers.
    while n > 0 and (1.0 - mu_a) ** (n - 1) <= eps:
        n -= 1
    while (1.0 - mu_a) ** n > eps:
        n += 1
    return n


@dataclass(frozen=True)
class AttackPlan:
    """Dense form of an :class:`AttackSpec` for the engine.

    Attributes:
        mask: (P, P) bool, ``mask[k, i]`` when k attacks i
        steps: (P, P) μᵃ per attacking pair
        states: (P, P, M) wᵃ per attacking pair
        start_iteration: First iteration with attack messages
    """

    mask: np.ndarray
    steps: np.ndarray
    states: np.ndarray
    start_iteration: int

    @classmethod
    def from_spec(cls, spec: AttackSpec, num_nodes: int, dimension: int) -> AttackPlan:
        """Densify ``spec``."""
        mask = np.zeros((num_nodes, num_nodes), dtype=bool)
        steps = np.zeros((num_nodes, num_nodes))
        states = np.zeros((num_nodes, num_nodes, dimension))
        for k, attacker in spec.attackers.items():
            for i, vector in attacker.malicious_state.items():
                mask[k, i] = True
                steps[k, i] = attacker.step
                states[k, i] = vector
        return cls(mask=mask, steps=steps, states=states, start_iteration=spec.start_iteration)

    def messages(self, w: np.ndarray) -> np.ndarray:
        """(P, P, M) fabricated messages; zero where no attack is mounted."""
        target = w[None, :, :]
        fabricated = target - self.steps[:, :, None] * (target - self.states)
        return np.where(self.mask[:, :, None], fabricated, 0.0)
