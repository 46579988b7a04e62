"""``python -m resilient_diffusion`` entry point delegating to the typer app."""

from __future__ import annotations

from resilient_diffusion.cli import app

if __name__ == "__main__":
    app()
