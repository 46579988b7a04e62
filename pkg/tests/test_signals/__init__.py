"""Signal generation tests."""
