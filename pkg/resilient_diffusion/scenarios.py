"""Data models plugged into the iteration engine.

Three scenarios produce (d, u) observations for normal nodes:

- :class:`GenericScenario`: d = uᵀwᵒ + η
- :class:`LocalizationScenario`: multi-target localization from distance
  and direction readings around each node's position
- :class:`SensingScenario`: multi-task spectrum sensing over rectangular
  basis functions, M_f frequency pairs per iteration

Each scenario draws a block of iterations for one node at a time from
substreams addressed by ``(run, node, channel, block)``.
"""

from __future__ import annotations

from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from .algorithms.adapt import AdaptParams, NodeEstimate, adapt_all
from .exceptions import ConfigurationError, TheoryError, ValidationError
from .models.enums import BlockMode, ChannelProfile, RegressorStyle
from .models.experiment import (
    ExperimentConfig,
    LocalizationScenarioConfig,
    SensingScenarioConfig,
)
from .models.noise import resolve_noise
from .signals import (
    Channel,
    NoiseSpec,
    RegressorModel,
    RngStream,
    draw_noise,
    draw_regressors,
    sample_noise,
    sample_regressor,
)
from .topology import IdealStates, Topology, load_ideal_states


@dataclass(frozen=True)
class DataBlock:
    """Observations of one node over consecutive iterations.

    Attributes:
        d: (count, K) desired signals
        u: (count, K, M) regressors, or (1, K, M) when they do not vary in time
        carry: Regressor state handed to the next block
    """

    d: np.ndarray
    u: np.ndarray
    carry: np.ndarray | None = None

    def at(self, offset: int) -> tuple[np.ndarray, np.ndarray]:
        """(d, u) at ``offset`` within the block."""
        return self.d[offset], self.u[offset if self.u.shape[0] > 1 else 0]


@dataclass(frozen=True)
class NodeProfile:
    """Per-node statistics resolved once per experiment.

    Attributes:
        regressor_variance: σ_u² per node (NaN for Byzantine nodes)
        noise: Resolved noise model per node (None for Byzantine nodes)
    """

    regressor_variance: np.ndarray
    noise: tuple[NoiseSpec | None, ...]

    def noise_variance(self, node: int) -> float:
        """σ_η² of ``node``; infinite for heavy-tailed noise."""
        model = self.noise[node]
        if model is None:
            raise ValidationError(f"node {node} has no noise model", field="node")
        return model.effective_variance


@dataclass(frozen=True)
class GenericScenario:
    """Linear data model d = uᵀwᵒ + η."""

    ideal: np.ndarray
    regressors: RegressorModel
    profile: NodeProfile
    pairs_per_iteration: int = 1
    block_mode: BlockMode = BlockMode.AVERAGE

    @property
    def dimension(self) -> int:
        """State dimension M."""
        return int(self.ideal.shape[1])

    @property
    def white_regressors(self) -> bool:
        """Whether E{u uᵀ} = σ_u² I holds."""
        return self.regressors.style is not RegressorStyle.DIRECTION_JITTER

    def _noise(self, node: int) -> NoiseSpec:
        model = self.profile.noise[node]
        if model is None:
            raise ValidationError(f"node {node} draws no data", field="node")
        return model

    def draw_block(
        self,
        node: int,
        base: RngStream,
        block: int,
        count: int,
        carry: np.ndarray | None,
    ) -> DataBlock:
        """Draw ``count`` iterations of data for ``node``."""
        u = draw_regressors(
            self.regressors, node, base.child(Channel.REGRESSOR, block), count, previous=carry
        )
        eta = draw_noise(self._noise(node), base.child(Channel.NOISE, block), count)
        d = u @ self.ideal[node] + eta
        return DataBlock(d=d[:, None], u=u[:, None, :], carry=u[-1])


@dataclass(frozen=True)
class LocalizationScenario(GenericScenario):
    """Localization of one planar target per cluster.

    Node i at position p_i reads a noisy distance r_i = uᵀ(wᵒ − p_i) + η
    along a noisy direction u. The adjusted signal d = r + uᵀp_i turns the
    reading into the linear model d = uᵀwᵒ + η.
    """

    positions: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))

    def direction(self, node: int) -> np.ndarray:
        """Unit direction from p_i to the node's target (zero when they coincide)."""
        offset = self.ideal[node] - self.positions[node]
        norm = float(np.linalg.norm(offset))
        return offset / norm if norm > 0.0 else np.zeros_like(offset)

    def _direction_arg(self, node: int) -> np.ndarray | None:
        if self.regressors.style is RegressorStyle.DIRECTION_JITTER:
            return self.direction(node)
        return None

    def localization_pair(self, node: int, stream: RngStream) -> tuple[float, np.ndarray]:
        """Draw one (d, u) pair for ``node`` from a single stream."""
        u = sample_regressor(self.regressors, node, stream, direction=self._direction_arg(node))
        eta = sample_noise(self._noise(node), stream)
        p = self.positions[node]
        r = float(u @ (self.ideal[node] - p)) + eta
        return r + float(u @ p), u

    def draw_block(
        self,
        node: int,
        base: RngStream,
        block: int,
        count: int,
        carry: np.ndarray | None,
    ) -> DataBlock:
        """Draw ``count`` iterations of localization readings for ``node``."""
        u = draw_regressors(
            self.regressors,
            node,
            base.child(Channel.REGRESSOR, block),
            count,
            previous=carry,
            direction=self._direction_arg(node),
        )
        eta = draw_noise(self._noise(node), base.child(Channel.NOISE, block), count)
        p = self.positions[node]
        r = u @ (self.ideal[node] - p) + eta
        d = r + u @ p
        return DataBlock(d=d[:, None], u=u[:, None, :], carry=u[-1])


def basis_matrix(num_basis: int, num_freqs: int) -> np.ndarray:
    """(M_f, M) rectangular basis evaluations.

    Frequency sample ι sits at f = ι/M_f on [0, 1); basis m covers
    [m/M, (m+1)/M) with amplitude one.
    """
    if num_basis < 1 or num_freqs < 1:
        raise ValidationError("basis and frequency counts must be positive", field="num_basis")
    owner = (np.arange(num_freqs) * num_basis) // num_freqs
    basis = np.zeros((num_freqs, num_basis))
    basis[np.arange(num_freqs), owner] = 1.0
    return basis


def frequency_grid(num_freqs: int) -> np.ndarray:
    """Normalized frequency samples f_ι = ι/M_f."""
    return np.arange(num_freqs) / num_freqs


@dataclass(frozen=True)
class SensingScenario:
    """Spectrum sensing with M_f frequency pairs per iteration.

    Received PSD samples, receiver noise already subtracted, follow
    d_ι = |H_i(f_ι)|² b(f_ι)ᵀwᵒ + v_ι + ω_ι with a Gaussian background v of
    variance σ_r²(σ_r² + 2Φ_i(f_ι))/divisor and impulses ω.
    """

    ideal: np.ndarray
    basis: np.ndarray
    gains: np.ndarray
    impulse: NoiseSpec | None
    receiver_noise: float = 0.1
    background_divisor: float = 10.0
    block_mode: BlockMode = BlockMode.AVERAGE
    normal: frozenset[int] = frozenset()

    @property
    def dimension(self) -> int:
        """Number of basis functions M."""
        return int(self.basis.shape[1])

    @property
    def pairs_per_iteration(self) -> int:
        """Frequency samples M_f per iteration."""
        return int(self.basis.shape[0])

    @property
    def white_regressors(self) -> bool:
        """Channel-scaled basis rows are never white."""
        return False

    def regressors(self, node: int) -> np.ndarray:
        """(M_f, M) channel-scaled basis rows b_i(f_ι)."""
        return self.gains[node][:, None] * self.basis

    def psd(self, node: int) -> np.ndarray:
        """Noise-free received PSD Φ_i(f_ι)."""
        return self.regressors(node) @ self.ideal[node]

    def background_variance(self, node: int) -> np.ndarray:
        """Per-frequency background variance σ²_{v,ι}."""
        sigma_r2 = self.receiver_noise
        return sigma_r2 * (sigma_r2 + 2.0 * self.psd(node)) / self.background_divisor

    def _check(self, node: int) -> None:
        if node not in self.normal:
            raise ValidationError(f"node {node} draws no data", field="node")

    def sensing_pairs(self, node: int, stream: RngStream) -> list[tuple[float, np.ndarray]]:
        """Draw one iteration of (d_ι, b_ι) pairs for ``node`` from a single stream."""
        self._check(node)
        regressors = self.regressors(node)
        rng = stream.generator
        v = np.sqrt(self.background_variance(node)) * rng.standard_normal(self.pairs_per_iteration)
        omega = (
            draw_noise(self.impulse, stream, self.pairs_per_iteration)
            if self.impulse is not None
            else np.zeros(self.pairs_per_iteration)
        )
        d = regressors @ self.ideal[node] + v + omega
        return [(float(d[k]), regressors[k]) for k in range(self.pairs_per_iteration)]

    def draw_block(
        self,
        node: int,
        base: RngStream,
        block: int,
        count: int,
        carry: np.ndarray | None,
    ) -> DataBlock:
        """Draw ``count`` iterations of PSD samples for ``node``."""
        self._check(node)
        k = self.pairs_per_iteration
        regressors = self.regressors(node)
        std = np.sqrt(self.background_variance(node))
        v = std * base.child(Channel.NOISE, block).generator.standard_normal((count, k))
        d = self.psd(node)[None, :] + v
        if self.impulse is not None:
            d = d + draw_noise(self.impulse, base.child(Channel.IMPULSE, block), (count, k))
        return DataBlock(d=d, u=regressors[None, :, :], carry=None)


def block_adapt(
    state: NodeEstimate,
    params: AdaptParams,
    pairs: Sequence[tuple[float, np.ndarray]],
    mode: BlockMode = BlockMode.AVERAGE,
) -> NodeEstimate:
    """Adapt one node from K pairs observed in the same iteration.

    The average mode gives ψ = w + μ(1/K)Σ f(e_ι)e_ι b_ι with every e_ι taken
    at w; the sequential mode takes K micro-steps of μ/K.

    Raises:
        ValidationError: if ``pairs`` is empty
    """
    if not pairs:
        raise ValidationError("block update needs at least one pair", field="pairs")
    d = np.array([[pair[0] for pair in pairs]], dtype=float)
    u = np.stack([np.asarray(pair[1], dtype=float) for pair in pairs])[None, :, :]
    psi = adapt_all(
        np.asarray(state.w, dtype=float)[None, :],
        d,
        u,
        np.array([params.step_size]),
        params.kernel,
        params.gm_lambda,
        mode,
    )[0]
    return NodeEstimate(w=state.w, psi=psi)


Scenario = GenericScenario | LocalizationScenario | SensingScenario


def psd_curves(
    config: SensingScenarioConfig,
    ideal_states: IdealStates,
) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Ground-truth transmitted PSD per cluster over the frequency grid."""
    basis = basis_matrix(config.num_basis, config.num_freqs)
    curves = {
        label: basis @ vector for label, vector in sorted(ideal_states.per_cluster_state.items())
    }
    return frequency_grid(config.num_freqs), curves


def sensing_ideal_states(config: SensingScenarioConfig) -> IdealStates:
    """Sparse nonnegative wᵒ per cluster from the active basis lists."""
    states: dict[str, np.ndarray] = {}
    for label, bases in config.active_bases.items():
        vector = np.zeros(config.num_basis)
        vector[list(bases)] = config.power
        states[label] = vector
    return IdealStates(states)


def resolve_ideal_states(
    config: ExperimentConfig,
    topology: Topology,
    declared: IdealStates,
) -> IdealStates:
    """Pick the ideal states an experiment estimates.

    Localization targets win over the config's ``ideal_states``, which win
    over the topology document. Sensing falls back to its active bases.
    """
    spec = config.scenario
    if isinstance(spec, LocalizationScenarioConfig) and spec.targets is not None:
        return load_ideal_states(spec.targets, topology)
    if config.ideal_states is not None:
        return load_ideal_states(config.ideal_states, topology)
    if isinstance(spec, SensingScenarioConfig) and not declared.per_cluster_state:
        return sensing_ideal_states(spec)
    return declared


def _per_node(value: float | dict[str, float], nodes: Sequence[int], name: str, size: int) -> np.ndarray:
    out = np.full(size, np.nan)
    if not isinstance(value, dict):
        out[list(nodes)] = value
        return out
    for node in nodes:
        if str(node) not in value:
            raise ConfigurationError(f"missing value for node {node}", config_key=f"{name}.{node}")
        out[node] = value[str(node)]
    unknown = sorted(set(value) - {str(node) for node in nodes})
    if unknown:
        raise ConfigurationError(f"unknown or Byzantine nodes {unknown}", config_key=name)
    return out


def per_node_parameter(
    value: float | dict[str, float],
    topology: Topology,
    name: str,
) -> np.ndarray:
    """Expand a shared or per-node parameter into a (P,) array (NaN on Byzantine rows).

    Raises:
        ConfigurationError: if a per-node mapping misses or invents a normal node
    """
    return _per_node(value, topology.normal_nodes, name, topology.num_nodes)


def _uniform_draws(seed: int, key: int, size: int, bounds: tuple[float, float]) -> np.ndarray:
    stream = RngStream(seed, (int(Channel.HETEROGENEITY), key))
    return stream.generator.uniform(bounds[0], bounds[1], size)


def build_profile(config: ExperimentConfig, topology: Topology, ideal: np.ndarray) -> NodeProfile:
    """Draw per-node regressor variances and resolve per-node noise models."""
    size = topology.num_nodes
    regressor = config.regressor
    if regressor.variance_range is not None:
        variances = _uniform_draws(config.seed, 0, size, regressor.variance_range)
    else:
        variances = np.full(size, regressor.variance)
    scale_range = config.heterogeneity.noise_scale_range
    scales = _uniform_draws(config.seed, 1, size, scale_range) if scale_range else np.ones(size)
    variances = variances.copy()
    variances[topology.byzantine_mask] = np.nan
    noise: list[NoiseSpec | None] = []
    for node in range(size):
        if node in topology.byzantine:
            noise.append(None)
            continue
        power = float(variances[node] * ideal[node] @ ideal[node])
        noise.append(resolve_noise(config.noise, power, float(scales[node])))
    return NodeProfile(regressor_variance=variances, noise=tuple(noise))


def build_scenario(
    config: ExperimentConfig,
    topology: Topology,
    ideal_states: IdealStates,
) -> Scenario:
    """Assemble the scenario an experiment config declares.

    Raises:
        ConfigurationError: on inconsistent scenario settings
    """
    spec = config.scenario
    if isinstance(spec, SensingScenarioConfig):
        return _build_sensing(config, spec, topology, ideal_states)
    ideal = ideal_states.node_matrix(topology)
    profile = build_profile(config, topology, ideal)
    regressors = RegressorModel(
        dimension=ideal_states.dimension,
        per_node_variance={node: float(profile.regressor_variance[node]) for node in topology.normal_nodes},
        style=regressor_style(config),
    )
    if isinstance(spec, LocalizationScenarioConfig):
        if ideal_states.dimension != 2:
            raise ConfigurationError("localization targets are planar", config_key="ideal_states")
        if topology.positions is None:
            raise ConfigurationError("localization needs node positions", config_key="topology.positions")
        return LocalizationScenario(
            ideal=ideal,
            regressors=regressors,
            profile=profile,
            positions=np.asarray(topology.positions, dtype=float),
        )
    return GenericScenario(ideal=ideal, regressors=regressors, profile=profile)


def regressor_style(config: ExperimentConfig) -> RegressorStyle:
    """Regressor style, checked against the scenario."""
    style = config.regressor.style
    if style is RegressorStyle.DIRECTION_JITTER and not isinstance(
        config.scenario, LocalizationScenarioConfig
    ):
        raise ConfigurationError(
            "direction_jitter regressors need a localization scenario",
            config_key="regressor.style",
        )
    return style


def _build_sensing(
    config: ExperimentConfig,
    spec: SensingScenarioConfig,
    topology: Topology,
    ideal_states: IdealStates,
) -> SensingScenario:
    if ideal_states.dimension != spec.num_basis:
        raise ConfigurationError(
            f"ideal states have dimension {ideal_states.dimension}, expected {spec.num_basis}",
            config_key="scenario.num_basis",
        )
    noise = config.noise
    if getattr(noise, "snr_db", None) is not None:
        raise ConfigurationError("sensing impulses need an explicit variance", config_key="noise.snr_db")
    impulse = resolve_noise(noise, 0.0)
    gains = np.ones((topology.num_nodes, spec.num_freqs))
    if spec.channel is ChannelProfile.LOGNORMAL:
        for node in topology.normal_nodes:
            stream = RngStream(config.seed, (int(Channel.CHANNEL_GAIN), node))
            gains[node] = 10.0 ** (spec.channel_sigma_db * stream.generator.standard_normal(spec.num_freqs) / 10.0)
    return SensingScenario(
        ideal=ideal_states.node_matrix(topology),
        basis=basis_matrix(spec.num_basis, spec.num_freqs),
        gains=gains,
        impulse=impulse,
        receiver_noise=spec.receiver_noise,
        background_divisor=spec.background_divisor,
        block_mode=spec.block_mode,
        normal=frozenset(topology.normal_nodes),
    )


def require_theory_support(scenario: Scenario) -> None:
    """Reject scenarios whose statistics the steady-state analysis cannot use.

    Raises:
        TheoryError: for sensing scenarios, non-white regressors or infinite-variance noise
    """
    if isinstance(scenario, SensingScenario):
        raise TheoryError("steady-state analysis needs white regressors; sensing is not supported")
    if not scenario.white_regressors:
        raise TheoryError("steady-state analysis needs white regressors")
    for node, model in enumerate(scenario.profile.noise):
        if model is not None and not model.finite_variance:
            raise TheoryError(
                "steady-state analysis needs finite noise variance",
                details={"node": node, "noise": model.kind},
            )
