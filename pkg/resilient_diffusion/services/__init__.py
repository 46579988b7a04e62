"""resilient-diffusion services module."""

from .experiment_service import (
    ExperimentService,
    MetricsTrace,
    PreparedExperiment,
    prepare_experiment,
    simulate_run,
    subnetwork_partition,
)
from .outputs import emit_outputs
from .theory_service import TheoryService

__all__ = [
    "ExperimentService",
    "MetricsTrace",
    "PreparedExperiment",
    "TheoryService",
    "emit_outputs",
    "prepare_experiment",
    "simulate_run",
    "subnetwork_partition",
]
