"""Adaptation, combination and attack primitives.

The network-wide iteration lives in :mod:`resilient_diffusion.algorithms.engine`.
"""

from .adapt import AdaptParams, NodeEstimate, adapt_step, error, gm_cost, gm_scale
from .attack import AttackSpec, build_attack, fabricate_message, predicted_capture_time
from .combine import (
    CombineState,
    combination_weights,
    combine_step,
    cost_contribution,
    removal_set,
    update_gamma,
)

__all__ = [
    "AdaptParams",
    "AttackSpec",
    "CombineState",
    "NodeEstimate",
    "adapt_step",
    "build_attack",
    "combination_weights",
    "combine_step",
    "cost_contribution",
    "error",
    "fabricate_message",
    "gm_cost",
    "gm_scale",
    "predicted_capture_time",
    "removal_set",
    "update_gamma",
]
