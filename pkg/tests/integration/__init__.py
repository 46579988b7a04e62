"""End-to-end experiment tests."""
