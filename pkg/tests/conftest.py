"""Pytest configuration and fixtures for resilient-diffusion tests."""

from __future__ import annotations

import copy
from typing import TYPE_CHECKING, Any

import pytest

from resilient_diffusion.models import ExperimentConfig, parse_experiment_config
from resilient_diffusion.topology import Topology, line_topology, ring_topology

if TYPE_CHECKING:
    from pathlib import Path


CLUSTER_STATES = {"A": [0.1, 0.2], "B": [0.7, 0.8]}


@pytest.fixture
def line3() -> Topology:
    """Three-node path 0-1-2 in one cluster."""
    return line_topology(3)


@pytest.fixture
def ring6() -> Topology:
    """Six-node ring: nodes 0-2 in cluster A, 3-5 in cluster B."""
    return ring_topology(6)


@pytest.fixture
def ring6_byzantine() -> Topology:
    """Six-node ring with node 2 Byzantine."""
    return ring_topology(6, byzantine=[2])


@pytest.fixture
def generic_config_data() -> dict[str, Any]:
    """Small attack-free two-cluster experiment document."""
    return {
        "name": "unit",
        "topology": {"kind": "ring", "nodes": 6},
        "ideal_states": copy.deepcopy(CLUSTER_STATES),
        "algorithms": ["rdlmg"],
        "adapt": {"step_size": 0.05, "gm_lambda": 1.0},
        "combine": {"forgetting": 0.05, "removal_count": 1},
        "noise": {"kind": "gaussian", "variance": 0.01},
        "iterations": 40,
        "runs": 2,
        "seed": 7,
    }


@pytest.fixture
def generic_config(generic_config_data: dict[str, Any]) -> ExperimentConfig:
    """Validated form of ``generic_config_data``."""
    return parse_experiment_config(generic_config_data)


@pytest.fixture
def attacked_config_data(generic_config_data: dict[str, Any]) -> dict[str, Any]:
    """The small experiment with Byzantine node 2 attacking its normal neighbors."""
    data = copy.deepcopy(generic_config_data)
    data["topology"] = {"kind": "ring", "nodes": 6, "byzantine": [2]}
    data["attack"] = {"malicious_state": [0.4, 0.5], "step": 0.05}
    return data


@pytest.fixture
def attacked_config(attacked_config_data: dict[str, Any]) -> ExperimentConfig:
    """Validated form of ``attacked_config_data``."""
    return parse_experiment_config(attacked_config_data)


@pytest.fixture
def output_dir(tmp_path: Path) -> Path:
    """Fresh directory for emitted artifacts."""
    out = tmp_path / "out"
    out.mkdir()
    return out
