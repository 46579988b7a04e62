"""Per-node adaptation: error, Geman-McClure cost and scale, and the LMS/LMG step."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import overload

import numpy as np

from resilient_diffusion.exceptions import DivergenceError, ValidationError
from resilient_diffusion.models.enums import BlockMode, Kernel


@dataclass(frozen=True)
class AdaptParams:
    """Adaptation parameters of one node.

    Attributes:
        step_size: μ > 0
        gm_lambda: λ > 0, ignored by the LMS kernel
        kernel: LMS or LMG
    """

    step_size: float
    gm_lambda: float = 1.0
    kernel: Kernel = Kernel.LMG

    def __post_init__(self) -> None:
        if self.step_size <= 0.0:
            raise ValidationError("step size must be positive", field="step_size")
        if self.gm_lambda <= 0.0:
            raise ValidationError("gm_lambda must be positive", field="gm_lambda")


@dataclass(frozen=True)
class NodeEstimate:
    """Current estimate w_i(n) and intermediate estimate ψ_i(n)."""

    w: np.ndarray
    psi: np.ndarray

    @classmethod
    def initial(cls, w: np.ndarray) -> NodeEstimate:
        """Start with ψ = w."""
        w = np.asarray(w, dtype=float)
        return cls(w=w, psi=w.copy())


def _check_dims(u: np.ndarray, w: np.ndarray) -> None:
    if u.shape != w.shape:
        raise ValidationError(f"dimension mismatch: u {u.shape} vs w {w.shape}", field="u")


def error(d: float, u: np.ndarray, w: np.ndarray) -> float:
    """Return e = d − uᵀw."""
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    _check_dims(u, w)
    return float(d - u @ w)


@overload
def gm_cost(e: float, lam: float) -> float: ...
@overload
def gm_cost(e: np.ndarray, lam: float) -> np.ndarray: ...


def gm_cost(e: float | np.ndarray, lam: float) -> float | np.ndarray:
    """Geman-McClure cost 0.5e²/(1+λe²), bounded by 0.5/λ."""
    e2 = np.square(e)
    return 0.5 * e2 / (1.0 + lam * e2)


@overload
def gm_scale(e: float, lam: float) -> float: ...
@overload
def gm_scale(e: np.ndarray, lam: float) -> np.ndarray: ...


def gm_scale(e: float | np.ndarray, lam: float) -> float | np.ndarray:
    """Scale function f(e) = 1/(1+λe²)², with d/de gm_cost(e) = f(e)·e."""
    return 1.0 / np.square(1.0 + lam * np.square(e))


def kernel_scale(e: np.ndarray, kernel: Kernel, lam: float) -> np.ndarray:
    """Per-error scale: f(e) for LMG, ones for LMS."""
    if kernel is Kernel.LMS:
        return np.ones_like(e)
    return gm_scale(e, lam)


def adapt_step(
    state: NodeEstimate,
    params: AdaptParams,
    d: float,
    u: np.ndarray,
    node: int = 0,
    iteration: int = 0,
) -> NodeEstimate:
    """Compute ψ_i(n+1) = w_i(n) + μ f(e) e u; ``w`` is left unchanged.

    Raises:
        DivergenceError: if the new intermediate estimate is not finite
    """
    u = np.asarray(u, dtype=float)
    e = error(d, u, state.w)
    scale = 1.0 if params.kernel is Kernel.LMS else float(gm_scale(e, params.gm_lambda))
    psi = state.w + params.step_size * scale * e * u
    if not np.all(np.isfinite(psi)):
        raise DivergenceError("intermediate estimate is not finite", node=node, iteration=iteration)
    return replace(state, psi=psi)


def adapt_all(
    w: np.ndarray,
    d: np.ndarray,
    u: np.ndarray,
    step_size: np.ndarray,
    kernel: Kernel,
    gm_lambda: float,
    mode: BlockMode = BlockMode.AVERAGE,
) -> np.ndarray:
    """Adapt every node at once from a block of K pairs per node.

    Args:
        w: (P, M) current estimates
        d: (P, K) desired signals
        u: (P, K, M) regressors
        step_size: (P,) μ per node
        kernel: LMS or LMG
        gm_lambda: λ
        mode: Average the K robust gradients, or take K sequential steps of μ/K

    Returns:
        (P, M) intermediate estimates
    """
    k = d.shape[1]
    mu = step_size[:, None]
    if mode is BlockMode.AVERAGE or k == 1:
        e = d - np.einsum("pkm,pm->pk", u, w)
        gradient = np.einsum("pk,pkm->pm", kernel_scale(e, kernel, gm_lambda) * e, u) / k
        return w + mu * gradient
    psi = w.copy()
    for pair in range(k):
        u_k = u[:, pair, :]
        e = d[:, pair] - np.einsum("pm,pm->p", u_k, psi)
        psi += (mu / k) * (kernel_scale(e, kernel, gm_lambda) * e)[:, None] * u_k
    return psi
