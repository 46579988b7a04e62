"""Steady-state theory tests."""
