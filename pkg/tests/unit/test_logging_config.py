"""Tests for logging configuration and structured log helpers."""

import logging
from unittest.mock import MagicMock, patch

import numpy as np
import orjson
import structlog
from rich.logging import RichHandler

from resilient_diffusion.logging_config import (
    configure_logging,
    configure_stdlib_logging,
    configure_structlog,
    configure_third_party_loggers,
    log_divergence,
    log_error_with_context,
    log_experiment_summary,
    log_run_completed,
    orjson_serializer,
)


def _mock_settings(mock_settings, level="INFO", fmt="console"):
    mock_settings.log_level = level
    mock_settings.log_format = fmt
    mock_settings.log_show_caller = False


class TestStdlibLogging:
    """Test standard library logging configuration."""

    @patch("resilient_diffusion.logging_config.settings")
    def test_debug_uses_rich_handler(self, mock_settings):
        """DEBUG level logs through a RichHandler."""
        _mock_settings(mock_settings, level="DEBUG")
        configure_stdlib_logging()

        root_logger = logging.getLogger()
        assert root_logger.level == logging.DEBUG
        assert any(isinstance(h, RichHandler) for h in root_logger.handlers)

    @patch("resilient_diffusion.logging_config.settings")
    def test_info_uses_stream_handler(self, mock_settings):
        """Other levels log through a plain stream handler."""
        _mock_settings(mock_settings, level="INFO")
        configure_stdlib_logging()

        root_logger = logging.getLogger()
        assert root_logger.level == logging.INFO
        assert len(root_logger.handlers) == 1
        assert not isinstance(root_logger.handlers[0], RichHandler)

    @patch("resilient_diffusion.logging_config.settings")
    def test_third_party_loggers_quietened(self, mock_settings):
        """joblib and numba are limited to warnings."""
        _mock_settings(mock_settings, level="INFO")
        configure_third_party_loggers()

        assert logging.getLogger("joblib").level == logging.WARNING
        assert logging.getLogger("numba").level == logging.WARNING
        assert logging.getLogger("asyncio").level == logging.WARNING

    @patch("resilient_diffusion.logging_config.settings")
    def test_asyncio_logger_in_debug(self, mock_settings):
        """asyncio is raised to INFO in debug mode."""
        _mock_settings(mock_settings, level="DEBUG")
        configure_third_party_loggers()

        assert logging.getLogger("asyncio").level == logging.INFO


class TestStructlogConfiguration:
    """Test structlog configuration."""

    @patch("resilient_diffusion.logging_config.settings")
    def test_json_format(self, mock_settings):
        """JSON format configures a JSON renderer."""
        _mock_settings(mock_settings, fmt="json")
        configure_structlog()

        processors = structlog.get_config()["processors"]
        assert isinstance(processors[-1], structlog.processors.JSONRenderer)

    @patch("resilient_diffusion.logging_config.settings")
    def test_console_format(self, mock_settings):
        """Console format configures the dev console renderer."""
        _mock_settings(mock_settings, fmt="console")
        configure_structlog()

        processors = structlog.get_config()["processors"]
        assert isinstance(processors[-1], structlog.dev.ConsoleRenderer)

    @patch("resilient_diffusion.logging_config.settings")
    def test_configure_logging_returns_logger(self, mock_settings):
        """configure_logging returns a usable bound logger."""
        _mock_settings(mock_settings)
        logger = configure_logging()
        assert logger is not None
        assert hasattr(logger, "info")


class TestSerializer:
    """Test the orjson serializer."""

    def test_serializes_numpy(self):
        """Numpy arrays serialize as lists."""
        payload = orjson.loads(orjson_serializer({"msd": np.array([1.0, 2.0])}))
        assert payload == {"msd": [1.0, 2.0]}

    def test_falls_back_to_str(self):
        """Unknown objects serialize via str()."""
        payload = orjson.loads(orjson_serializer({"value": complex(1, 2)}))
        assert payload == {"value": "(1+2j)"}


class TestLogHelpers:
    """Test structured log helpers."""

    def test_log_run_completed(self):
        """Run completion logs at debug level with rounded duration."""
        logger = MagicMock()
        log_run_completed(logger, run=3, iterations=100, duration=0.12345, final_msd_db=-20.12345)

        logger.debug.assert_called_once_with(
            "Run completed",
            run=3,
            iterations=100,
            duration_ms=123.45,
            final_msd_db=-20.123,
        )

    def test_log_run_completed_without_msd(self):
        """final_msd_db is omitted when not given."""
        logger = MagicMock()
        log_run_completed(logger, run=0, iterations=10, duration=1.0)

        kwargs = logger.debug.call_args.kwargs
        assert "final_msd_db" not in kwargs

    def test_log_divergence(self):
        """Divergence logs a warning carrying run, iteration and node."""
        logger = MagicMock()
        log_divergence(logger, run=1, iteration=57, node=4)

        logger.warning.assert_called_once_with("Run diverged", run=1, iteration=57, node=4)

    def test_log_experiment_summary(self):
        """The summary is logged at info level."""
        logger = MagicMock()
        log_experiment_summary(
            logger,
            algorithm="RDLMG",
            runs=20,
            iterations=5000,
            divergent_runs=0,
            duration=2.5,
            final_msd_db=-31.0,
        )

        args, kwargs = logger.info.call_args
        assert args == ("Experiment completed",)
        assert kwargs["algorithm"] == "RDLMG"
        assert kwargs["divergent_runs"] == 0
        assert kwargs["duration_ms"] == 2500.0
        assert kwargs["final_msd_db"] == -31.0

    def test_log_error_with_context(self):
        """Errors are logged with type, message, context and traceback."""
        logger = MagicMock()
        log_error_with_context(logger, ValueError("bad"), "simulate", {"run": 2})

        args, kwargs = logger.error.call_args
        assert args == ("Operation failed",)
        assert kwargs["error_type"] == "ValueError"
        assert kwargs["error_message"] == "bad"
        assert kwargs["context"] == {"run": 2}
        assert kwargs["exc_info"] is True
