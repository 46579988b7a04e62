"""Custom exceptions for resilient-diffusion."""

from __future__ import annotations

from typing import Any


class SimulationError(Exception):
    """Base exception for all simulator errors."""

    def __init__(self, message: str, details: dict[str, Any] | None = None) -> None:
        """Initialize simulation error.

        Args:
            message: Error message
            details: Structured context for logs and reports
        """
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def __str__(self) -> str:
        """Return string representation of error."""
        if self.details:
            context = ", ".join(f"{key}={value}" for key, value in sorted(self.details.items()))
            return f"{self.message} ({context})"
        return self.message


class ValidationError(SimulationError):
    """Exception raised for input and contract violations."""

    def __init__(self, message: str, field: str | None = None) -> None:
        """Initialize validation error.

        Args:
            message: Error message
            field: Name of the offending argument or field
        """
        super().__init__(message)
        self.field = field

    def __str__(self) -> str:
        """Return string representation of validation error."""
        return self.message


class SchemaError(ValidationError):
    """Exception raised when a topology or experiment document violates its schema."""

    def __init__(self, message: str, location: str | None = None) -> None:
        """Initialize schema error.

        Args:
            message: Error message
            location: Dot/bracket path of the offending entry, e.g. ``edges[3]``
        """
        super().__init__(message, field=location)
        self.location = location

    def __str__(self) -> str:
        """Return string representation with location."""
        if self.location:
            return f"{self.location}: {self.message}"
        return self.message


class ConfigurationError(SimulationError):
    """Exception raised for invalid experiment or settings values."""

    def __init__(self, message: str, config_key: str | None = None) -> None:
        """Initialize configuration error.

        Args:
            message: Error message
            config_key: Configuration key that caused the error
        """
        super().__init__(message)
        self.config_key = config_key

    def __str__(self) -> str:
        """Return string representation with the offending key."""
        if self.config_key:
            return f"{self.config_key}: {self.message}"
        return self.message


class DivergenceError(SimulationError):
    """An estimate became non-finite or exceeded the divergence threshold.

    Raised by the iteration engine and caught by the harness per run; the run
    is recorded as divergent and the remaining runs continue.
    """

    def __init__(
        self,
        message: str,
        node: int,
        iteration: int,
        run: int | None = None,
    ) -> None:
        """Initialize divergence error.

        Args:
            message: Error message
            node: Node whose estimate diverged
            iteration: Iteration at which divergence was detected
            run: Run index, filled in by the harness
        """
        super().__init__(message, details={"node": node, "iteration": iteration})
        self.node = node
        self.iteration = iteration
        self.run = run


class TheoryError(SimulationError):
    """Exception raised when theory inputs cannot be evaluated."""


class OutputError(SimulationError):
    """Exception raised when artifacts cannot be written."""

    def __init__(self, message: str, path: str) -> None:
        """Initialize output error.

        Args:
            message: Error message
            path: Path that could not be written
        """
        super().__init__(message, details={"path": path})
        self.path = path
