"""resilient-diffusion Pydantic models."""

from .enums import *
from .experiment import *
from .network import *
from .noise import *
from .reports import *

__all__ = [
    "AdaptConfig",
    "AlgorithmKind",
    "AlphaStableNoise",
    "AttackConfig",
    "AttackerConfig",
    "BlockMode",
    "ChannelProfile",
    "AlgorithmTheory",
    "CombineConfig",
    "DivergenceRecord",
    "ContaminatedGaussianNoise",
    "ExperimentConfig",
    "FileTopology",
    "GaussianNoise",
    "GenericScenario",
    "GridTopology",
    "HeterogeneityConfig",
    "InlineTopology",
    "Kernel",
    "Manifest",
    "NodeBound",
    "NodeProfileEntry",
    "LocalizationScenarioConfig",
    "NoiseModel",
    "RandomGeometricTopology",
    "RegressorConfig",
    "RegressorStyle",
    "RingTopology",
    "ScenarioConfig",
    "SensingScenarioConfig",
    "TopologyDocument",
    "TopologySource",
    "TheoryReport",
    "TopologySnapshot",
    "TraceConfig",
    "load_experiment_config",
    "parse_experiment_config",
    "resolve_noise",
]
