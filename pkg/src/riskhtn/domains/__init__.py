"""Bundled benchmark files (marine data-collection domain and utility specs)."""

from importlib import resources
from pathlib import Path


def bundled(name: str) -> Path:
    """Filesystem path of a bundled domain/problem/utility file."""
    return Path(str(resources.files(__package__).joinpath(name)))
