"""Bundled case files."""

from importlib import resources


def case118_path() -> str:
    """Filesystem path of the bundled IEEE 118-bus MATPOWER case."""
    return str(resources.files(__package__) / "case118.m")
