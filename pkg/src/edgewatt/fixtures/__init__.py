"""Bundled reference model descriptions."""

from importlib import resources

from ..graph import ModelGraph, parse_model_graph

FIXTURE_NAMES = ("alexnet1", "alexnet2")


def load_fixture(name: str) -> ModelGraph:
    if name not in FIXTURE_NAMES:
        raise KeyError(f"unknown fixture {name!r}; have {FIXTURE_NAMES}")
    text = resources.files(__package__).joinpath(f"{name}.json").read_text()
    return parse_model_graph(text)
