"""Test suite for resilient-diffusion."""
