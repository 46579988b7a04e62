"""CSV and JSON artifacts of a simulated experiment."""

from __future__ import annotations

import csv
import math
from collections.abc import Iterable, Sequence
from pathlib import Path
from typing import Any

import numpy as np
import orjson
from pydantic import BaseModel

from resilient_diffusion import __version__
from resilient_diffusion.exceptions import OutputError
from resilient_diffusion.models.reports import Manifest, NodeProfileEntry
from resilient_diffusion.scenarios import SensingScenario
from resilient_diffusion.utils.hashing import content_hash

from .experiment_service import MetricsTrace, PreparedExperiment

MSD_NETWORK = "msd_network.csv"
MSD_PER_NODE = "msd_per_node.csv"
MSD_SUBNETWORK = "msd_subnetwork.csv"
ATTACKED_DISTANCE = "attacked_distance.csv"
WEIGHTS_FINAL = "weights_final.csv"
MEAN_ESTIMATES = "mean_estimates.csv"
TOPOLOGY_FINAL = "topology_final.json"
MANIFEST = "manifest.json"


def _db(values: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(values)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    """Write one CSV file.

    Raises:
        OutputError: when the file cannot be written
    """
    try:
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OutputError(f"cannot write {path.name}: {exc.strerror}", path=str(path)) from exc


def write_json(path: Path, document: BaseModel | dict[str, Any]) -> None:
    """Write one JSON document (NaN and infinities become null).

    Raises:
        OutputError: when the file cannot be written
    """
    payload = document.model_dump(mode="json") if isinstance(document, BaseModel) else document
    try:
        path.write_bytes(
            orjson.dumps(payload, option=orjson.OPT_INDENT_2 | orjson.OPT_SERIALIZE_NUMPY)
        )
    except OSError as exc:
        raise OutputError(f"cannot write {path.name}: {exc.strerror}", path=str(path)) from exc


def _float_or_none(value: float) -> float | None:
    return float(value) if math.isfinite(value) else None


def node_profile(prepared: PreparedExperiment) -> dict[str, NodeProfileEntry]:
    """Per-node cluster, role and resolved variances for the manifest."""
    topology = prepared.topology
    scenario = prepared.scenario
    profile: dict[str, NodeProfileEntry] = {}
    for node in range(topology.num_nodes):
        byzantine = node in topology.byzantine
        regressor: float | None = None
        noise: float | None = None
        if not byzantine and not isinstance(scenario, SensingScenario):
            regressor = _float_or_none(float(scenario.profile.regressor_variance[node]))
            noise = _float_or_none(scenario.profile.noise_variance(node))
        profile[str(node)] = NodeProfileEntry(
            cluster=topology.clusters[node],
            byzantine=byzantine,
            regressor_variance=regressor,
            noise_variance=noise,
        )
    return profile


def _weight_rows(weights: np.ndarray, trace: MetricsTrace) -> list[tuple[int, int, float]]:
    if trace.completed_runs == 0:
        return []
    adjacency = trace.topology.adjacency
    normal = ~trace.topology.byzantine_mask
    pairs = np.argwhere(adjacency & normal[None, :])
    return [(int(j), int(i), float(weights[j, i])) for j, i in pairs]


def emit_outputs(
    trace: MetricsTrace,
    directory: str | Path,
    prepared: PreparedExperiment,
) -> Manifest:
    """Write every artifact of ``trace`` into ``directory``.

    Args:
        trace: Aggregated metrics of one algorithm
        directory: Output directory, created if missing
        prepared: The experiment the trace came from

    Returns:
        The manifest, also written as ``manifest.json``

    Raises:
        OutputError: when the directory or a file cannot be written
    """
    out = Path(directory)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create output directory: {exc.strerror}", path=str(out)) from exc

    iterations = trace.iterations.tolist()
    normal = list(trace.topology.normal_nodes)
    files: list[str] = []

    write_csv(
        out / MSD_NETWORK,
        ["iteration", "msd_db"],
        zip(iterations, trace.msd_network.tolist(), strict=True),
    )
    per_node_db = _db(trace.msd_per_node)
    write_csv(
        out / MSD_PER_NODE,
        ["iteration", "node", "msd_db"],
        (
            (n, node, float(per_node_db[row, node]))
            for row, n in enumerate(iterations)
            for node in normal
        ),
    )
    sub_db = _db(trace.msd_subnetwork)
    write_csv(
        out / MSD_SUBNETWORK,
        ["iteration", "subnetwork", "size", "msd_db"],
        (
            (n, s, len(members), float(sub_db[row, s]))
            for row, n in enumerate(iterations)
            for s, members in enumerate(trace.subnetworks)
        ),
    )
    write_csv(
        out / ATTACKED_DISTANCE,
        ["iteration", "node", "distance"],
        (
            (n, node, float(trace.attacked_distance[row, a]))
            for row, n in enumerate(iterations)
            for a, node in enumerate(trace.attacked_nodes)
        ),
    )
    write_csv(out / WEIGHTS_FINAL, ["j", "i", "weight"], _weight_rows(trace.final_weights, trace))
    files += [MSD_NETWORK, MSD_PER_NODE, MSD_SUBNETWORK, ATTACKED_DISTANCE, WEIGHTS_FINAL]

    for n, weights in sorted(trace.weight_snapshots.items()):
        name = f"weights_iter_{n}.csv"
        write_csv(out / name, ["j", "i", "weight"], _weight_rows(weights, trace))
        files.append(name)

    if trace.mean_estimates is not None:
        estimates = trace.mean_estimates
        write_csv(
            out / MEAN_ESTIMATES,
            ["iteration", "node", "component", "value"],
            (
                (n, node, m, float(estimates[row, node, m]))
                for row, n in enumerate(iterations)
                for node in normal
                for m in range(estimates.shape[2])
            ),
        )
        files.append(MEAN_ESTIMATES)

    write_json(out / TOPOLOGY_FINAL, trace.snapshot())
    files.append(TOPOLOGY_FINAL)

    config = prepared.config.model_copy(update={"algorithms": [trace.algorithm]})
    config_document = config.model_dump(mode="json")
    manifest = Manifest(
        version=__version__,
        name=config.name,
        algorithm=trace.algorithm,
        seed=config.seed,
        runs=trace.runs,
        iterations=config.iterations,
        input_hash=content_hash(config_document),
        config=config_document,
        divergences=trace.divergent_runs,
        attacked_nodes=list(trace.attacked_nodes),
        subnetworks=[list(members) for members in trace.subnetworks],
        node_profile=node_profile(prepared),
        files=[*files, MANIFEST],
    )
    write_json(out / MANIFEST, manifest)
    return manifest
