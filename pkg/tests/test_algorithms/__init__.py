"""Adapt, combine and attack tests."""
