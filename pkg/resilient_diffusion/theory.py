"""Closed-form predictions: mean-stability step bound and steady-state MSD.

The steady-state analysis runs over normal nodes only, on a topology without
Byzantine nodes and without inter-cluster edges. With collective matrices

- 𝒜 = A ⊗ I_M, the expected steady-state combination matrix
- ℳ = diag(μ_i I_M), ℱ = diag(E{f_i} I_M), 𝒰 = diag(σ_u,i² I_M)
- ℋ = diag(σ_η,i² σ_u,i² I_M)

the error covariance obeys 𝒲 = B𝒲Bᵀ + CℋCᵀ with B = 𝒜ᵀ(I − ℳℱ𝒰) and
C = 𝒜ᵀℳℱ. In vectorized form Φ = B ⊗ B and
vec(𝒲) = (I − Φ)⁻¹(𝒜ᵀ ⊗ 𝒜ᵀ)[(ℳℱ) ⊗ (ℳℱ)]vec(ℋ); small networks solve that
system directly, larger ones solve the equivalent discrete Lyapunov
equation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal

import numpy as np
import scipy.linalg

from .exceptions import TheoryError, ValidationError
from .models.enums import AlgorithmKind, Kernel
from .models.experiment import ExperimentConfig
from .scenarios import (
    SensingScenario,
    build_scenario,
    per_node_parameter,
    require_theory_support,
    resolve_ideal_states,
)
from .topology import Topology, build_topology

# Largest N·M solved through the explicit (N²M²)² Kronecker system.
KRONECKER_LIMIT = 64
# N·M up to which "auto" prefers the Kronecker system.
AUTO_KRONECKER = 32

Method = Literal["auto", "kronecker", "lyapunov"]


def expected_scale(gm_lambda: float | np.ndarray, noise_variance: float | np.ndarray) -> np.ndarray:
    """Steady-state E{f} ≈ 1/(1+λσ_η²)²; λ = 0 gives the LMS value 1."""
    return 1.0 / np.square(1.0 + np.asarray(gm_lambda) * np.asarray(noise_variance))


def mean_step_bound(
    regressor_variance: float,
    gm_lambda: float,
    noise_variance: float,
    dimension: int = 1,
) -> float:
    """Largest μ keeping the LMG recursion stable in the mean.

    Returns 2/(E{f}·λ_max(E{U})) with λ_max(E{U}) = σ_u² for white regressors,
    i.e. 2(1+λσ_η²)²/σ_u².
    """
    if regressor_variance <= 0.0 or noise_variance < 0.0 or gm_lambda < 0.0 or dimension < 1:
        raise ValidationError("bound inputs must be positive", field="regressor_variance")
    return float(2.0 / (expected_scale(gm_lambda, noise_variance) * regressor_variance))


@dataclass(frozen=True)
class TheoryInputs:
    """Steady-state analysis inputs over N normal nodes.

    Attributes:
        adjacency: (N, N) steady-state neighborhoods including self-loops
        dimension: M
        step_size: μ_i
        gm_lambda: λ; 0 for the LMS kernel
        regressor_variance: σ_u,i²
        noise_variance: σ_η,i², finite
        removal_count: F used to pick the steady-state removal sets
        rank_own: Whether a node's own contribution competes for removal
        cooperative: False for non-cooperative kinds (A = I)
        node_ids: Original node id of every row
    """

    adjacency: np.ndarray
    dimension: int
    step_size: np.ndarray
    gm_lambda: float
    regressor_variance: np.ndarray
    noise_variance: np.ndarray
    removal_count: int = 0
    rank_own: bool = False
    cooperative: bool = True
    node_ids: tuple[int, ...] = field(default=())

    def __post_init__(self) -> None:
        n = self.adjacency.shape[0]
        for name in ("step_size", "regressor_variance", "noise_variance"):
            value = np.asarray(getattr(self, name), dtype=float)
            if value.shape != (n,):
                raise ValidationError(f"{name} must have one entry per node", field=name)
            object.__setattr__(self, name, value)
        if not np.all(np.isfinite(self.noise_variance)):
            raise TheoryError("steady-state analysis needs finite noise variances")
        if np.any(self.noise_variance <= 0.0) or np.any(self.regressor_variance <= 0.0):
            raise ValidationError("variances must be positive", field="noise_variance")
        if np.any(self.step_size <= 0.0):
            raise ValidationError("step sizes must be positive", field="step_size")
        adjacency = np.asarray(self.adjacency, dtype=bool) | np.eye(n, dtype=bool)
        if not np.array_equal(adjacency, adjacency.T):
            raise ValidationError("adjacency must be symmetric", field="adjacency")
        object.__setattr__(self, "adjacency", adjacency)
        if not self.node_ids:
            object.__setattr__(self, "node_ids", tuple(range(n)))

    @property
    def num_nodes(self) -> int:
        """N."""
        return int(self.adjacency.shape[0])


@dataclass(frozen=True)
class TheoryResult:
    """Steady-state predictions.

    ``msd`` and ``per_node`` are linear; ``*_db`` are 10·log₁₀ of them.
    When ``stable`` is False the MSD values are infinite.
    """

    msd: float
    per_node: np.ndarray
    spectral_radius: float
    stable: bool
    weights: np.ndarray
    removal_sets: dict[int, set[int]]
    expected_scale: np.ndarray
    step_bounds: np.ndarray
    node_ids: tuple[int, ...]
    method: str

    @property
    def msd_db(self) -> float:
        """Networked MSD in dB."""
        return float(10.0 * np.log10(self.msd))

    @property
    def per_node_db(self) -> np.ndarray:
        """Per-node MSD in dB."""
        return 10.0 * np.log10(self.per_node)


def expected_inverse_gamma(inputs: TheoryInputs) -> np.ndarray:
    """E{γ⁻²_j(∞)} ≈ (1+λσ_η,j²)⁴/(μ_j² Tr(E{U_j}) σ_η,j²) per sender j."""
    trace_u = inputs.dimension * inputs.regressor_variance
    return (1.0 + inputs.gm_lambda * inputs.noise_variance) ** 4 / (
        np.square(inputs.step_size) * trace_u * inputs.noise_variance
    )


def steady_state_removal(inputs: TheoryInputs) -> dict[int, set[int]]:
    """Steady-state R_i: the min(F, |N_i|−1) neighbors with largest E{γ⁻²}.

    The expected contribution γ⁻⁴·Q is ranked by γ⁻² since Q is evaluated
    on the receiver's own data. Node i itself only competes when
    ``rank_own`` is set. Ties go to the lowest local index.
    """
    inverse = expected_inverse_gamma(inputs)
    sets: dict[int, set[int]] = {}
    for i in range(inputs.num_nodes):
        neighborhood = np.flatnonzero(inputs.adjacency[:, i])
        count = min(inputs.removal_count, neighborhood.size - 1) if inputs.cooperative else 0
        candidates = [j for j in neighborhood.tolist() if inputs.rank_own or j != i]
        ranked = sorted(candidates, key=lambda j: (-inverse[j], j))
        sets[i] = set(ranked[: max(count, 0)])
    return sets


def steady_state_weights(inputs: TheoryInputs) -> np.ndarray:
    """Expected combination matrix E{A(∞)}, indexed ``[j, i]``.

    Every column sums to one over the receiver's survivors.
    """
    n = inputs.num_nodes
    if not inputs.cooperative:
        return np.eye(n)
    inverse = expected_inverse_gamma(inputs)
    removal = steady_state_removal(inputs)
    survivors = inputs.adjacency.copy()
    for i, removed in removal.items():
        survivors[list(removed), i] = False
    if not np.all(survivors.any(axis=0)):
        raise ValidationError("a node has no steady-state survivors", field="removal_count")
    unnormalized = np.where(survivors, inverse[:, None], 0.0)
    return unnormalized / unnormalized.sum(axis=0, keepdims=True)


def _collective(inputs: TheoryInputs, weights: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    m = inputs.dimension
    eye_m = np.eye(m)
    scale = expected_scale(inputs.gm_lambda, inputs.noise_variance)
    a_cal = np.kron(weights, eye_m)
    mf = np.kron(np.diag(inputs.step_size * scale), eye_m)
    u_cal = np.kron(np.diag(inputs.regressor_variance), eye_m)
    h_cal = np.kron(np.diag(inputs.noise_variance * inputs.regressor_variance), eye_m)
    b = a_cal.T @ (np.eye(inputs.num_nodes * m) - mf @ u_cal)
    c = a_cal.T @ mf
    return b, c, h_cal


def build_phi(
    inputs: TheoryInputs,
    weights: np.ndarray | None = None,
    expanded: bool = False,
) -> np.ndarray:
    """Φ = (𝒜ᵀ(I − ℳℱ𝒰)) ⊗ (𝒜ᵀ(I − ℳℱ𝒰)).

    With ``expanded`` the same matrix is assembled as
    (𝒜ᵀ ⊗ 𝒜ᵀ)[(I − ℳℱ𝒰) ⊗ (I − ℳℱ𝒰)].
    """
    if weights is None:
        weights = steady_state_weights(inputs)
    b, _, _ = _collective(inputs, weights)
    if not expanded:
        return np.kron(b, b)
    m = inputs.dimension
    a_cal = np.kron(weights, np.eye(m))
    scale = expected_scale(inputs.gm_lambda, inputs.noise_variance)
    mf = np.kron(np.diag(inputs.step_size * scale), np.eye(m))
    u_cal = np.kron(np.diag(inputs.regressor_variance), np.eye(m))
    inner = np.eye(inputs.num_nodes * m) - mf @ u_cal
    return np.kron(a_cal.T, a_cal.T) @ np.kron(inner, inner)


def _vec(matrix: np.ndarray) -> np.ndarray:
    return matrix.reshape(-1, order="F")


def steady_state_msd(inputs: TheoryInputs, method: Method = "auto") -> TheoryResult:
    """Steady-state networked and per-node MSD.

    Args:
        inputs: Analysis inputs
        method: ``kronecker`` solves (I − Φ)vec(𝒲) = rhs, ``lyapunov`` solves
            𝒲 = B𝒲Bᵀ + CℋCᵀ; ``auto`` picks by network size

    Returns:
        The predictions; an unstable recursion is reported, not raised

    Raises:
        TheoryError: if the Kronecker system is requested for a network too
            large to assemble
    """
    n, m = inputs.num_nodes, inputs.dimension
    size = n * m
    if method == "kronecker" and size > KRONECKER_LIMIT:
        raise TheoryError(
            f"Kronecker system needs N·M <= {KRONECKER_LIMIT}",
            details={"nodes": n, "dimension": m},
        )
    chosen = method if method != "auto" else ("kronecker" if size <= AUTO_KRONECKER else "lyapunov")
    weights = steady_state_weights(inputs)
    b, c, h_cal = _collective(inputs, weights)
    radius_b = float(np.max(np.abs(np.linalg.eigvals(b))))
    common = {
        "spectral_radius": radius_b**2,
        "weights": weights,
        "removal_sets": steady_state_removal(inputs),
        "expected_scale": expected_scale(inputs.gm_lambda, inputs.noise_variance),
        "step_bounds": np.array(
            [
                mean_step_bound(su, inputs.gm_lambda, se, m)
                for su, se in zip(inputs.regressor_variance, inputs.noise_variance, strict=True)
            ]
        ),
        "node_ids": inputs.node_ids,
        "method": chosen,
    }
    if radius_b >= 1.0:
        return TheoryResult(msd=np.inf, per_node=np.full(n, np.inf), stable=False, **common)

    if chosen == "kronecker":
        phi = np.kron(b, b)
        rhs = np.kron(c, c) @ _vec(h_cal)
        covariance = np.linalg.solve(np.eye(size * size) - phi, rhs).reshape((size, size), order="F")
    else:
        covariance = scipy.linalg.solve_discrete_lyapunov(b, c @ h_cal @ c.T)

    blocks = covariance.reshape(n, m, n, m)
    per_node = np.einsum("iaia->i", blocks)
    msd = float(_vec(np.eye(size)) @ _vec(covariance)) / n
    return TheoryResult(msd=msd, per_node=per_node, stable=True, **common)


def steady_state_topology(topology: Topology) -> tuple[np.ndarray, tuple[int, ...]]:
    """Normal-node adjacency without Byzantine nodes or inter-cluster edges.

    Returns:
        The (N, N) adjacency with self-loops and the original id per row
    """
    nodes = topology.normal_nodes
    sub = topology.adjacency[np.ix_(nodes, nodes)].copy()
    labels = np.array([topology.clusters[k] for k in nodes])
    sub &= labels[:, None] == labels[None, :]
    return sub, nodes


def theory_inputs(config: ExperimentConfig, algorithm: AlgorithmKind) -> TheoryInputs:
    """Assemble :class:`TheoryInputs` for one algorithm of an experiment.

    Raises:
        TheoryError: for scenarios or noise the analysis cannot evaluate
    """
    resolved = config.resolved()
    topology, ideal_states = build_topology(resolved.topology, resolved.seed)
    ideal_states = resolve_ideal_states(resolved, topology, ideal_states)
    scenario = build_scenario(resolved, topology, ideal_states)
    require_theory_support(scenario)
    assert not isinstance(scenario, SensingScenario)
    adjacency, nodes = steady_state_topology(topology)
    index = list(nodes)
    step = per_node_parameter(resolved.adapt.step_size, topology, "adapt.step_size")[index]
    profile = scenario.profile
    gm_lambda = 0.0 if algorithm.kernel is Kernel.LMS else float(resolved.adapt.gm_lambda or 1.0)
    return TheoryInputs(
        adjacency=adjacency,
        dimension=scenario.dimension,
        step_size=step,
        gm_lambda=gm_lambda,
        regressor_variance=profile.regressor_variance[index],
        noise_variance=np.array([profile.noise_variance(k) for k in nodes]),
        removal_count=resolved.combine.removal_count if algorithm.resilient else 0,
        rank_own=resolved.combine.rank_own,
        cooperative=algorithm.cooperative,
        node_ids=nodes,
    )
