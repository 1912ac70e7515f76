from __future__ import annotations

import pytest

from scc import load_fixture


@pytest.fixture(scope="session")
def webserver():
    return load_fixture("webserver")


@pytest.fixture(scope="session")
def danger():
    return load_fixture("webserver_danger")


@pytest.fixture(scope="session")
def stats():
    return load_fixture("webserver_stats")


@pytest.fixture(scope="session")
def topfive():
    return load_fixture("webserver_topfive")
