"""The experiment documents shipped under configs/ stay valid."""

from __future__ import annotations

from pathlib import Path

import pytest

from resilient_diffusion.models import load_experiment_config
from resilient_diffusion.services import prepare_experiment
from resilient_diffusion.topology import load_topology

CONFIGS = Path(__file__).resolve().parents[2] / "configs"
EXPERIMENTS = sorted(p for p in CONFIGS.glob("*.json") if not p.name.endswith(".topology.json"))


@pytest.mark.parametrize("path", EXPERIMENTS, ids=lambda p: p.stem)
def test_experiment_prepares(path):
    prepared = prepare_experiment(load_experiment_config(path))
    assert prepared.config.name == path.stem.replace("_", "-")


def test_topology_document_is_f_local():
    topology = load_topology(CONFIGS / "two_clusters.topology.json")
    assert topology.byzantine == frozenset({8})
    assert topology.max_byzantine_neighbors() <= 1


def test_file_topology_attack_targets():
    prepared = prepare_experiment(load_experiment_config(CONFIGS / "file_topology_attack.json"))
    assert prepared.attacked_nodes == (2,)
