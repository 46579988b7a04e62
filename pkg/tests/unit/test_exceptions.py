"""Tests for custom exceptions."""

from resilient_diffusion.exceptions import (
    ConfigurationError,
    DivergenceError,
    OutputError,
    SchemaError,
    SimulationError,
    TheoryError,
    ValidationError,
)


class TestSimulationError:
    """Test base SimulationError."""

    def test_message_only(self):
        error = SimulationError("Something went wrong")
        assert str(error) == "Something went wrong"
        assert error.message == "Something went wrong"
        assert error.details == {}

    def test_details_sorted_in_str(self):
        """Details render as sorted key=value pairs."""
        error = SimulationError("Failed", details={"node": 3, "iteration": 12})
        assert str(error) == "Failed (iteration=12, node=3)"


class TestValidationError:
    """Test ValidationError."""

    def test_field(self):
        error = ValidationError("dimension mismatch", field="ideal_states")
        assert str(error) == "dimension mismatch"
        assert error.field == "ideal_states"
        assert isinstance(error, SimulationError)


class TestSchemaError:
    """Test SchemaError."""

    def test_with_location(self):
        error = SchemaError("self-loop on node 2", location="edges[3]")
        assert str(error) == "edges[3]: self-loop on node 2"
        assert error.location == "edges[3]"
        assert error.field == "edges[3]"
        assert isinstance(error, ValidationError)

    def test_without_location(self):
        assert str(SchemaError("empty document")) == "empty document"


class TestConfigurationError:
    """Test ConfigurationError."""

    def test_with_key(self):
        error = ConfigurationError("forgetting factors must lie in (0, 1)", config_key="combine.forgetting")
        assert str(error) == "combine.forgetting: forgetting factors must lie in (0, 1)"
        assert error.config_key == "combine.forgetting"

    def test_without_key(self):
        assert str(ConfigurationError("bad")) == "bad"


class TestDivergenceError:
    """Test DivergenceError."""

    def test_attributes(self):
        error = DivergenceError("estimate exceeded threshold", node=4, iteration=57)
        assert error.node == 4
        assert error.iteration == 57
        assert error.run is None
        assert str(error) == "estimate exceeded threshold (iteration=57, node=4)"

    def test_run_filled_later(self):
        error = DivergenceError("non-finite estimate", node=0, iteration=1)
        error.run = 5
        assert error.run == 5


class TestOutputError:
    """Test OutputError."""

    def test_path(self):
        error = OutputError("cannot write", path="/tmp/x.csv")
        assert error.path == "/tmp/x.csv"
        assert str(error) == "cannot write (path=/tmp/x.csv)"


def test_theory_error_is_simulation_error():
    assert isinstance(TheoryError("unstable"), SimulationError)
