"""Toolchain for Sense/Compute/Control architecture descriptions with interaction contracts."""

from __future__ import annotations

from importlib import resources

from .model import Architecture

__version__ = "0.1.0"

FIXTURES = ("webserver", "webserver_danger", "webserver_stats", "webserver_topfive")


def fixture_path(name: str):
    """Path-like handle of a bundled fixture file such as ``webserver.adl``."""
    return resources.files(__package__).joinpath("fixtures", name)


def load_fixture(name: str) -> Architecture:
    """Parse a bundled architecture by stem, e.g. ``load_fixture("webserver")``."""
    from .parser import parse

    path = fixture_path(f"{name}.adl")
    return parse(path.read_text(encoding="utf-8"), path=f"{name}.adl")
