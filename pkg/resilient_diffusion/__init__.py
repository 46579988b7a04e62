"""resilient-diffusion: Byzantine-resilient robust diffusion over clustered multi-task networks."""

from __future__ import annotations

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("resilient-diffusion")
except PackageNotFoundError:  # pragma: no cover - source tree without install
    __version__ = "0.0.0"

__author__ = "Resilient-Diffusion Development Team"
