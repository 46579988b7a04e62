"""Topology tests."""
