"""Typer command-line interface for resilient-diffusion.

A single ``Typer`` app exposing ``simulate`` / ``theory`` / ``bound`` /
``topology-snapshot`` / ``psd`` / ``config`` / ``version``. Configuration
and schema errors exit with code 2, I/O errors with code 1; divergent runs
are reported in the manifest and never change the exit code.
"""

from __future__ import annotations

from collections.abc import Iterator
from contextlib import contextmanager
from pathlib import Path
from typing import Annotated

import structlog
import typer
from rich.console import Console
from rich.table import Table

from . import __version__
from .config import get_defaults, settings
from .exceptions import OutputError, SimulationError
from .logging_config import configure_logging, log_error_with_context
from .models.enums import AlgorithmKind
from .models.experiment import ExperimentConfig, SensingScenarioConfig, load_experiment_config
from .scenarios import psd_curves
from .services import ExperimentService, TheoryService, emit_outputs, prepare_experiment
from .services.outputs import write_csv, write_json
from .theory import Method

app = typer.Typer(
    name="resilient-diffusion",
    add_completion=False,
    no_args_is_help=True,
    help="resilient-diffusion: simulate and analyse Byzantine-resilient diffusion networks.",
)
console = Console()

ConfigArg = Annotated[
    Path,
    typer.Argument(help="Experiment document (JSON) or a manifest written by 'simulate'."),
]


@contextmanager
def _reported_errors(operation: str) -> Iterator[None]:
    """Log simulator errors, print them in red and exit non-zero."""
    try:
        yield
    except SimulationError as exc:
        logger = structlog.get_logger("resilient_diffusion")
        log_error_with_context(logger, exc, operation, exc.details)
        if isinstance(exc, OutputError):
            console.print(f"[red]Output error:[/red] {exc}")
            raise typer.Exit(code=1) from exc
        console.print(f"[red]Invalid experiment:[/red] {exc}")
        raise typer.Exit(code=2) from exc


def _load(path: Path, runs: int | None = None, seed: int | None = None) -> ExperimentConfig:
    config = load_experiment_config(path)
    updates: dict[str, int] = {}
    if runs is not None:
        updates["runs"] = runs
    if seed is not None:
        updates["seed"] = seed
    return config.model_copy(update=updates) if updates else config


def _fmt_db(value: float | None) -> str:
    return "n/a" if value is None else f"{value:.2f}"


@app.command()
def simulate(
    config_path: ConfigArg,
    out: Annotated[Path, typer.Option("--out", "-o", help="Output directory.")],
    runs: Annotated[int | None, typer.Option("--runs", min=1, help="Monte-Carlo runs R.")] = None,
    seed: Annotated[int | None, typer.Option("--seed", min=0, help="Root seed.")] = None,
    jobs: Annotated[
        int | None, typer.Option("--jobs", "-j", min=1, help="Parallel workers.")
    ] = None,
) -> None:
    """Run every algorithm of an experiment and write its artifacts.

    Each algorithm gets its own sub-directory named after it.
    """
    with _reported_errors("simulate"):
        config = _load(config_path, runs, seed)
        logger = configure_logging()
        prepared = prepare_experiment(config)
        service = ExperimentService(logger=logger, n_jobs=jobs)

        table = Table(title=f"{prepared.config.name}: {prepared.config.iterations} iterations")
        table.add_column("Algorithm", style="cyan")
        table.add_column("Runs", justify="right")
        table.add_column("Divergent", justify="right")
        table.add_column("Final MSD (dB)", justify="right")
        table.add_column("Output", style="white")
        for kind in prepared.config.algorithms:
            trace = service.run_experiment(prepared, kind)
            target = out / kind.value
            emit_outputs(trace, target, prepared)
            table.add_row(
                kind.label,
                str(trace.runs),
                str(len(trace.divergent_runs)),
                _fmt_db(trace.final_msd_db),
                str(target),
            )
        console.print(table)


@app.command()
def theory(
    config_path: ConfigArg,
    out: Annotated[Path, typer.Option("--out", "-o", help="JSON report path.")],
    method: Annotated[
        str, typer.Option("--method", help="auto, kronecker or lyapunov.")
    ] = "auto",
) -> None:
    """Write steady-state MSD predictions for every algorithm."""
    if method not in ("auto", "kronecker", "lyapunov"):
        console.print(f"[red]Invalid method '{method}'.[/red] Choose auto, kronecker or lyapunov.")
        raise typer.Exit(code=2)
    with _reported_errors("theory"):
        config = _load(config_path)
        service = TheoryService(logger=configure_logging())
        chosen: Method = method  # type: ignore[assignment]
        report = service.report(config, chosen)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_json(out, report)

        table = Table(title=f"Steady-state predictions: {report.name}")
        table.add_column("Algorithm", style="cyan")
        table.add_column("Method")
        table.add_column("ρ(Φ)", justify="right")
        table.add_column("MSD (dB)", justify="right")
        for entry in report.algorithms:
            table.add_row(
                entry.algorithm.label,
                entry.method,
                f"{entry.spectral_radius:.6f}",
                _fmt_db(entry.msd_db) if entry.stable else "[red]unstable[/red]",
            )
        console.print(table)


@app.command()
def bound(
    config_path: ConfigArg,
    algorithm: Annotated[
        AlgorithmKind | None,
        typer.Option("--algorithm", "-a", help="Algorithm, defaults to the first listed."),
    ] = None,
) -> None:
    """Print per-node mean-stability step-size bounds."""
    with _reported_errors("bound"):
        config = _load(config_path)
        bounds = TheoryService().bounds(config, algorithm)

    table = Table(title="Mean-stability step-size bounds")
    table.add_column("Node", justify="right", style="cyan")
    table.add_column("Cluster")
    table.add_column("σ_u²", justify="right")
    table.add_column("σ_η²", justify="right")
    table.add_column("E{f}", justify="right")
    table.add_column("μ", justify="right")
    table.add_column("Bound", justify="right")
    for entry in bounds:
        style = "green" if entry.within_bound else "red"
        table.add_row(
            str(entry.node),
            entry.cluster,
            f"{entry.regressor_variance:.4g}",
            f"{entry.noise_variance:.4g}",
            f"{entry.expected_scale:.4g}",
            f"[{style}]{entry.step_size:.4g}[/{style}]",
            f"{entry.step_bound:.4g}",
        )
    console.print(table)


@app.command("topology-snapshot")
def topology_snapshot(
    config_path: ConfigArg,
    iteration: Annotated[int, typer.Option("--iteration", "-n", min=0, help="Iterations to run.")],
    out: Annotated[Path | None, typer.Option("--out", "-o", help="JSON output path.")] = None,
    runs: Annotated[int, typer.Option("--runs", min=1, help="Monte-Carlo runs R.")] = 1,
    algorithm: Annotated[
        AlgorithmKind | None,
        typer.Option("--algorithm", "-a", help="Algorithm, defaults to the first listed."),
    ] = None,
) -> None:
    """Run N iterations and report the edges still carrying weight."""
    with _reported_errors("topology-snapshot"):
        config = _load(config_path, runs).model_copy(update={"iterations": iteration})
        service = ExperimentService(logger=configure_logging())
        trace = service.run_experiment(config, algorithm)
        snapshot = trace.snapshot()
        if out is not None:
            out.parent.mkdir(parents=True, exist_ok=True)
            write_json(out, snapshot)

    console.print(
        f"[green]{snapshot.algorithm.label}[/green] after {snapshot.iteration} iterations: "
        f"{len(snapshot.edges)} alive edges, {len(snapshot.components)} sub-networks"
    )
    for index, component in enumerate(snapshot.components):
        console.print(f"  S{index}: {component}")
    if snapshot.isolated_byzantine:
        console.print(f"  isolated Byzantine nodes: {snapshot.isolated_byzantine}")


@app.command()
def psd(
    config_path: ConfigArg,
    out: Annotated[Path, typer.Option("--out", "-o", help="CSV output path.")],
) -> None:
    """Write the ground-truth PSD of every cluster of a sensing experiment."""
    with _reported_errors("psd"):
        config = _load(config_path)
        if not isinstance(config.scenario, SensingScenarioConfig):
            console.print("[red]Invalid experiment:[/red] psd needs a sensing scenario")
            raise typer.Exit(code=2)
        prepared = prepare_experiment(config)
        freqs, curves = psd_curves(config.scenario, prepared.ideal_states)
        labels = list(curves)
        out.parent.mkdir(parents=True, exist_ok=True)
        write_csv(
            out,
            ["frequency", *labels],
            (
                [float(f), *(float(curves[label][k]) for label in labels)]
                for k, f in enumerate(freqs)
            ),
        )
    console.print(f"[green]Wrote PSD of {len(labels)} clusters[/green] to {out}")


@app.command()
def config(
    config_path: ConfigArg,
    validate: Annotated[
        bool,
        typer.Option("--validate", help="Also build the topology, scenario and attack."),
    ] = False,
) -> None:
    """Show the resolved experiment (and optionally validate it end to end)."""
    with _reported_errors("config"):
        resolved = _load(config_path).resolved()
        if validate:
            prepare_experiment(resolved)

    table = Table(title=f"Experiment: {resolved.name}")
    table.add_column("Setting", style="cyan")
    table.add_column("Value", style="white")
    table.add_row("topology", resolved.topology.kind)
    table.add_row("scenario", resolved.scenario.kind)
    table.add_row("algorithms", ", ".join(kind.label for kind in resolved.algorithms))
    table.add_row("adapt.step_size", str(resolved.adapt.step_size))
    table.add_row("adapt.gm_lambda", str(resolved.adapt.gm_lambda))
    table.add_row("combine.forgetting", str(resolved.combine.forgetting))
    table.add_row("combine.q_smoothing", str(resolved.combine.q_smoothing))
    table.add_row("combine.removal_count", str(resolved.combine.removal_count))
    table.add_row("noise", resolved.noise.kind)
    table.add_row("attack", "none" if resolved.attack is None else f"μᵃ={resolved.attack.step}")
    table.add_row("iterations", str(resolved.iterations))
    table.add_row("runs", str(resolved.runs))
    table.add_row("seed", str(resolved.seed))
    table.add_row("edge_threshold", str(get_defaults().edge_threshold))
    table.add_row("n_jobs", str(settings.n_jobs))
    table.add_row("parallel_backend", settings.parallel_backend)
    console.print(table)
    if validate:
        console.print("[green]Configuration is valid[/green]")


@app.command()
def version() -> None:
    """Print the installed resilient-diffusion version."""
    console.print(f"resilient-diffusion {__version__}")


if __name__ == "__main__":
    app()
