"""Regressors, desired signals and noise processes with reproducible streams.

Every random draw comes from an :class:`RngStream`, a cursor over a Philox
substream addressed by ``(seed, path)``. The simulator addresses data by
``(run, node, channel, block)`` so a run's samples do not depend on how runs
are scheduled across workers.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass
from enum import IntEnum
from typing import overload

import numpy as np

from .exceptions import ValidationError
from .models.enums import RegressorStyle
from .models.noise import AlphaStableNoise, ContaminatedGaussianNoise, GaussianNoise

NoiseSpec = GaussianNoise | ContaminatedGaussianNoise | AlphaStableNoise

# Iterations of data drawn per substream block.
BLOCK_SIZE = 1024


class Channel(IntEnum):
    """Substream tags, one per independent random variable."""

    REGRESSOR = 1
    NOISE = 2
    IMPULSE = 3
    CHANNEL_GAIN = 4
    HETEROGENEITY = 5
    TOPOLOGY = 6


class RngStream:
    """Sequential draws from the Philox substream at ``(seed, path)``.

    Two streams with the same seed and path yield identical sequences.
    Children extend the path and are independent of their parent.
    """

    __slots__ = ("_generator", "path", "seed")

    def __init__(self, seed: int, path: tuple[int, ...] = ()) -> None:
        """Initialize a stream.

        Args:
            seed: Root seed, a 64-bit unsigned integer
            path: Substream address
        """
        if not 0 <= seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer", field="seed")
        self.seed = seed
        self.path = tuple(int(k) for k in path)
        self._generator: np.random.Generator | None = None

    def child(self, *keys: int) -> RngStream:
        """Return the substream at ``path + keys``."""
        return RngStream(self.seed, (*self.path, *keys))

    @property
    def generator(self) -> np.random.Generator:
        """The underlying generator; created on first use and then advanced."""
        if self._generator is None:
            sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=self.path)
            self._generator = np.random.Generator(np.random.Philox(sequence))
        return self._generator

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, path={self.path})"


def _alpha_stable(
    alpha: float,
    dispersion: float,
    rng: np.random.Generator,
    size: int | tuple[int, ...] | None,
) -> np.ndarray | float:
    # Chambers-Mallows-Stuck transform, symmetric and zero location.
    phi = rng.uniform(-0.5 * np.pi, 0.5 * np.pi, size)
    w = rng.standard_exponential(size)
    if alpha == 1.0:
        x = np.tan(phi)
    else:
        x = (
            np.sin(alpha * phi)
            / np.cos(phi) ** (1.0 / alpha)
            * (np.cos((1.0 - alpha) * phi) / w) ** ((1.0 - alpha) / alpha)
        )
    return dispersion * x


@overload
def draw_noise(model: NoiseSpec, stream: RngStream, size: None = None) -> float: ...
@overload
def draw_noise(model: NoiseSpec, stream: RngStream, size: int | tuple[int, ...]) -> np.ndarray: ...


def draw_noise(
    model: NoiseSpec,
    stream: RngStream,
    size: int | tuple[int, ...] | None = None,
) -> np.ndarray | float:
    """Draw noise samples from a resolved model.

    Contaminated Gaussian draws take the background, the Bernoulli gates and
    the impulses from the stream in that order.
    """
    rng = stream.generator
    if isinstance(model, GaussianNoise):
        return np.sqrt(model.effective_variance) * rng.standard_normal(size)
    if isinstance(model, ContaminatedGaussianNoise):
        if model.sigma_v2 is None:
            raise ValidationError("noise model must be resolved before sampling", field="sigma_v2")
        v = np.sqrt(model.sigma_v2) * rng.standard_normal(size)
        gate = rng.random(size) < model.p
        g = np.sqrt(model.impulse_variance) * rng.standard_normal(size)
        return v + gate * g
    return _alpha_stable(model.alpha, model.dispersion, rng, size)


def sample_noise(model: NoiseSpec, stream: RngStream) -> float:
    """Draw one noise sample η."""
    return float(draw_noise(model, stream))


@dataclass(frozen=True)
class RegressorModel:
    """Regression vector declaration.

    Attributes:
        dimension: Vector length M
        per_node_variance: σ_u² per node id
        style: IID vectors, a tapped-delay line, or a jittered direction
    """

    dimension: int
    per_node_variance: Mapping[int, float]
    style: RegressorStyle = RegressorStyle.IID

    def __post_init__(self) -> None:
        if self.dimension < 1:
            raise ValidationError("regressor dimension must be positive", field="dimension")
        if any(v <= 0.0 for v in self.per_node_variance.values()):
            raise ValidationError("regressor variances must be positive", field="per_node_variance")

    def variance(self, node: int) -> float:
        """σ_u² of ``node``."""
        try:
            return float(self.per_node_variance[node])
        except KeyError as exc:
            raise ValidationError(f"node {node} has no regressor variance", field="node") from exc


def draw_regressors(
    model: RegressorModel,
    node: int,
    stream: RngStream,
    count: int,
    previous: np.ndarray | None = None,
    direction: np.ndarray | None = None,
) -> np.ndarray:
    """Draw ``count`` consecutive regressors for ``node`` as a (count, M) array.

    Args:
        model: Regressor declaration
        node: Node id
        stream: Stream to draw from
        count: Number of consecutive vectors
        previous: Last tapped-delay vector; the line starts filled when None
        direction: Mean vector for the jittered-direction style
    """
    std = np.sqrt(model.variance(node))
    m = model.dimension
    rng = stream.generator
    if model.style is RegressorStyle.TAPPED_DELAY:
        if previous is None:
            history = std * rng.standard_normal(m - 1)[::-1]
        else:
            history = np.asarray(previous, dtype=float)[: m - 1][::-1]
        series = np.concatenate([history, std * rng.standard_normal(count)])
        # Row t is [x(t), x(t-1), ..., x(t-M+1)].
        return np.lib.stride_tricks.sliding_window_view(series, m)[:, ::-1].copy()
    jitter = std * rng.standard_normal((count, m))
    if model.style is RegressorStyle.DIRECTION_JITTER:
        if direction is None:
            raise ValidationError("direction_jitter regressors need a direction", field="direction")
        return jitter + np.asarray(direction, dtype=float)
    return jitter


def sample_regressor(
    model: RegressorModel,
    node: int,
    stream: RngStream,
    previous: np.ndarray | None = None,
    direction: np.ndarray | None = None,
) -> np.ndarray:
    """Draw one regressor u_i(n).

    For the tapped-delay style, ``previous`` is shifted by one position and a
    fresh scalar enters at the front.
    """
    return draw_regressors(model, node, stream, 1, previous=previous, direction=direction)[0]


def desired_signal(u: np.ndarray, w_true: np.ndarray, noise: float) -> float:
    """Return d = uᵀwᵒ + η.

    Raises:
        ValidationError: on a dimension mismatch
    """
    u = np.asarray(u, dtype=float)
    w_true = np.asarray(w_true, dtype=float)
    if u.shape != w_true.shape:
        raise ValidationError(f"dimension mismatch: u {u.shape} vs w {w_true.shape}", field="u")
    return float(u @ w_true + noise)
