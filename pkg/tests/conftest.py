"""Shared fixtures for the test suite."""

from importlib import resources

import pytest

from edgewatt.graph import parse_model_graph


def fixture_text(name: str) -> str:
    return (resources.files("edgewatt") / "fixtures" / name).read_text()


@pytest.fixture(scope="session")
def alexnet1():
    return parse_model_graph(fixture_text("alexnet1.json"))


@pytest.fixture(scope="session")
def alexnet2():
    return parse_model_graph(fixture_text("alexnet2.json"))
