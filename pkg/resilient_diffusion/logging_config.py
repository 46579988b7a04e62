"""Logging configuration for resilient-diffusion.

This module sets up structured logging using structlog with appropriate
formatters and handlers for interactive and batch use.
"""

from __future__ import annotations

import logging
import sys
from typing import TYPE_CHECKING, Any

import structlog
from rich.console import Console
from rich.logging import RichHandler

from . import __version__ as _package_version
from .config import settings

if TYPE_CHECKING:
    from structlog.typing import FilteringBoundLogger


def _add_static_fields(_logger: Any, _name: str, event_dict: dict[str, Any]) -> dict[str, Any]:
    """Add static `service` and `version` fields to every log event."""
    event_dict.setdefault("service", "resilient-diffusion")
    event_dict.setdefault("version", _package_version)
    return event_dict


def configure_stdlib_logging() -> None:
    """Configure standard library logging."""
    root_logger = logging.getLogger()
    root_logger.setLevel(getattr(logging, settings.log_level))

    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    handler: logging.Handler
    if settings.log_level == "DEBUG":
        console = Console(stderr=True)
        handler = RichHandler(
            console=console,
            show_time=True,
            show_path=settings.log_show_caller,
            markup=True,
            rich_tracebacks=True,
        )
        handler.setFormatter(logging.Formatter("%(message)s"))
    else:
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(
            logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s"),
        )

    handler.setLevel(getattr(logging, settings.log_level))
    root_logger.addHandler(handler)

    configure_third_party_loggers()


def configure_third_party_loggers() -> None:
    """Configure third-party library loggers."""
    is_debug = settings.log_level == "DEBUG"
    loggers_config = {
        "joblib": "WARNING",
        "numba": "WARNING",
        "matplotlib": "WARNING",
        "asyncio": "WARNING" if not is_debug else "INFO",
    }

    for logger_name, level in loggers_config.items():
        logging.getLogger(logger_name).setLevel(getattr(logging, level))


def configure_structlog() -> None:
    """Configure structlog for structured logging."""
    shared_processors: list[Any] = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.filter_by_level,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.stdlib.PositionalArgumentsFormatter(),
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        _add_static_fields,
    ]

    if settings.log_show_caller:
        shared_processors.append(
            structlog.processors.CallsiteParameterAdder(
                {
                    structlog.processors.CallsiteParameter.MODULE,
                    structlog.processors.CallsiteParameter.LINENO,
                },
            ),
        )

    if settings.log_format == "json":
        processors = [
            *shared_processors,
            structlog.processors.dict_tracebacks,
            structlog.processors.JSONRenderer(serializer=orjson_serializer),
        ]
    else:
        processors = [
            *shared_processors,
            structlog.dev.ConsoleRenderer(colors=settings.log_level == "DEBUG"),
        ]

    structlog.configure(
        processors=processors,
        wrapper_class=structlog.stdlib.BoundLogger,
        logger_factory=structlog.stdlib.LoggerFactory(),
        cache_logger_on_first_use=True,
    )


def configure_logging() -> FilteringBoundLogger:
    """Configure complete logging setup and return logger."""
    configure_stdlib_logging()
    configure_structlog()
    return structlog.get_logger("resilient_diffusion")  # type: ignore[no-any-return]


def orjson_serializer(obj: Any, **_kwargs: Any) -> str:
    """Fast JSON serializer using orjson."""
    import orjson

    return orjson.dumps(obj, option=orjson.OPT_SERIALIZE_NUMPY, default=str).decode("utf-8")


def log_run_completed(
    logger: FilteringBoundLogger,
    run: int,
    iterations: int,
    duration: float,
    final_msd_db: float | None = None,
) -> None:
    """Log completion of one Monte-Carlo run."""
    log_data: dict[str, Any] = {
        "run": run,
        "iterations": iterations,
        "duration_ms": round(duration * 1000, 2),
    }
    if final_msd_db is not None:
        log_data["final_msd_db"] = round(final_msd_db, 3)

    logger.debug("Run completed", **log_data)


def log_divergence(
    logger: FilteringBoundLogger,
    run: int,
    iteration: int,
    node: int,
) -> None:
    """Log a divergent run; the experiment continues."""
    logger.warning("Run diverged", run=run, iteration=iteration, node=node)


def log_experiment_summary(
    logger: FilteringBoundLogger,
    algorithm: str,
    runs: int,
    iterations: int,
    divergent_runs: int,
    duration: float,
    final_msd_db: float | None = None,
) -> None:
    """Log an experiment summary with structured data."""
    log_data: dict[str, Any] = {
        "algorithm": algorithm,
        "runs": runs,
        "iterations": iterations,
        "divergent_runs": divergent_runs,
        "duration_ms": round(duration * 1000, 2),
    }
    if final_msd_db is not None:
        log_data["final_msd_db"] = round(final_msd_db, 3)

    logger.info("Experiment completed", **log_data)


def log_error_with_context(
    logger: FilteringBoundLogger,
    error: Exception,
    operation: str,
    context: dict[str, Any] | None = None,
) -> None:
    """Log error with additional context."""
    log_data: dict[str, Any] = {
        "operation": operation,
        "error_type": type(error).__name__,
        "error_message": str(error),
    }

    if context:
        log_data["context"] = context

    logger.error("Operation failed", **log_data, exc_info=True)
