"""Shared fixtures: schemas, grammars, small populations, tiny models.

Everything here is cheap (sub-second) and session-scoped; the expensive
trained-model fixtures for the acceptance criteria live in
test_acceptance.py so plain unit runs never pay for them.
"""
from __future__ import annotations

import pytest

from actigen.grammar import make_reference_grammar, make_shifted_grammar, synth_population
from actigen.model import ModelConfig, init_params
from actigen.schema import default_schema


@pytest.fixture(scope="session")
def schema():
    return default_schema()


@pytest.fixture(scope="session")
def grammar_a():
    return make_reference_grammar()


@pytest.fixture(scope="session")
def grammar_b():
    return make_shifted_grammar()


@pytest.fixture(scope="session")
def pop_small(grammar_a):
    """200 agents from the reference grammar; shared read-only."""
    return synth_population(grammar_a, 200, seed=11)


@pytest.fixture(scope="session")
def tiny_config(schema):
    return ModelConfig.tiny(schema)


@pytest.fixture(scope="session")
def tiny_params(tiny_config):
    """Freshly initialized tiny model; treat as read-only."""
    return init_params(tiny_config, seed=0)
