"""Model tests for resilient-diffusion."""
