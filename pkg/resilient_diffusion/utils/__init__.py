"""Utility modules for resilient-diffusion."""

from .hashing import canonical_bytes, content_hash

__all__ = ["canonical_bytes", "content_hash"]
