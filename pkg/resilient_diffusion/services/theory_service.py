"""Steady-state predictions and step-size bounds for experiment documents."""

from __future__ import annotations

import math
from typing import TYPE_CHECKING

import numpy as np

from resilient_diffusion.models.enums import AlgorithmKind
from resilient_diffusion.models.reports import AlgorithmTheory, NodeBound, TheoryReport
from resilient_diffusion.theory import (
    Method,
    TheoryResult,
    expected_scale,
    mean_step_bound,
    steady_state_msd,
    theory_inputs,
)
from resilient_diffusion.topology import build_topology
from resilient_diffusion.utils.hashing import content_hash

if TYPE_CHECKING:
    from structlog.typing import FilteringBoundLogger

    from resilient_diffusion.models.experiment import ExperimentConfig


def _finite(value: float) -> float | None:
    return float(value) if math.isfinite(value) else None


def _algorithm_theory(algorithm: AlgorithmKind, result: TheoryResult) -> AlgorithmTheory:
    ids = [str(node) for node in result.node_ids]
    return AlgorithmTheory(
        algorithm=algorithm,
        method=result.method,
        stable=result.stable,
        spectral_radius=result.spectral_radius,
        msd=_finite(result.msd),
        msd_db=_finite(result.msd_db) if result.stable else None,
        per_node_msd_db={
            key: _finite(value) for key, value in zip(ids, result.per_node_db.tolist(), strict=True)
        },
        expected_scale=dict(zip(ids, result.expected_scale.tolist(), strict=True)),
        step_bounds=dict(zip(ids, result.step_bounds.tolist(), strict=True)),
        removal_sets={
            ids[i]: sorted(result.node_ids[j] for j in removed)
            for i, removed in sorted(result.removal_sets.items())
        },
        weights=result.weights.tolist(),
        node_ids=list(result.node_ids),
    )


class TheoryService:
    """Evaluates the closed-form analysis for experiment documents."""

    def __init__(self, logger: FilteringBoundLogger | None = None) -> None:
        """Initialize theory service.

        Args:
            logger: Optional logger instance
        """
        self.logger = logger

    def predict(
        self,
        config: ExperimentConfig,
        algorithm: AlgorithmKind,
        method: Method = "auto",
    ) -> TheoryResult:
        """Steady-state MSD of one algorithm.

        Raises:
            TheoryError: for scenarios or noise the analysis cannot evaluate
        """
        result = steady_state_msd(theory_inputs(config, algorithm), method)
        if self.logger:
            self.logger.info(
                "Steady-state prediction",
                algorithm=algorithm.label,
                method=result.method,
                stable=result.stable,
                msd_db=_finite(result.msd_db) if result.stable else None,
            )
        return result

    def report(self, config: ExperimentConfig, method: Method = "auto") -> TheoryReport:
        """Predictions for every algorithm the config lists."""
        resolved = config.resolved()
        return TheoryReport(
            name=resolved.name,
            input_hash=content_hash(resolved),
            algorithms=[
                _algorithm_theory(kind, self.predict(resolved, kind, method))
                for kind in resolved.algorithms
            ],
        )

    def bounds(self, config: ExperimentConfig, algorithm: AlgorithmKind | None = None) -> list[NodeBound]:
        """Per-node mean-stability bounds μ < 2(1+λσ_η²)²/σ_u²."""
        kind = algorithm or config.algorithms[0]
        inputs = theory_inputs(config, kind)
        resolved = config.resolved()
        topology, _ = build_topology(resolved.topology, resolved.seed)
        scale = expected_scale(inputs.gm_lambda, inputs.noise_variance)
        bounds: list[NodeBound] = []
        for row, node in enumerate(inputs.node_ids):
            bound = mean_step_bound(
                float(inputs.regressor_variance[row]),
                inputs.gm_lambda,
                float(inputs.noise_variance[row]),
                inputs.dimension,
            )
            step = float(inputs.step_size[row])
            bounds.append(
                NodeBound(
                    node=node,
                    cluster=topology.clusters[node],
                    step_size=step,
                    regressor_variance=float(inputs.regressor_variance[row]),
                    noise_variance=float(inputs.noise_variance[row]),
                    expected_scale=float(np.asarray(scale)[row]),
                    step_bound=bound,
                    within_bound=step < bound,
                )
            )
        return bounds
