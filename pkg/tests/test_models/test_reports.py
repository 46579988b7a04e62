"""Tests for report and manifest models."""

from __future__ import annotations

import pytest
from pydantic import ValidationError as PydanticValidationError

from resilient_diffusion.models import AlgorithmKind, DivergenceRecord, NodeProfileEntry, TopologySnapshot


class TestReportModels:
    """Report documents reject unknown fields and bad ranges."""

    def test_divergence_record(self):
        record = DivergenceRecord(run=3, iteration=17, node=2)
        assert record.model_dump() == {"run": 3, "iteration": 17, "node": 2}

    def test_divergence_rejects_negative(self):
        with pytest.raises(PydanticValidationError):
            DivergenceRecord(run=-1, iteration=0, node=0)

    def test_extra_forbidden(self):
        with pytest.raises(PydanticValidationError):
            NodeProfileEntry(
                cluster="A",
                byzantine=False,
                regressor_variance=1.0,
                noise_variance=0.01,
                unexpected=1,
            )

    def test_snapshot_serializes_edges(self):
        snapshot = TopologySnapshot(
            algorithm=AlgorithmKind.RDLMG,
            iteration=10,
            threshold=1e-3,
            num_nodes=3,
            edges=[(0, 1)],
            components=[[0, 1], [2]],
            isolated_byzantine=[],
            byzantine=[],
            clusters={"0": "A", "1": "A", "2": "B"},
        )
        dumped = snapshot.model_dump(mode="json")
        assert dumped["algorithm"] == "rdlmg"
        assert dumped["edges"] == [[0, 1]]
