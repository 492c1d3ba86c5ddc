from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from voiplan import InferenceEngine, Scenario, parse_theory

FIXTURES = Path(__file__).parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fig1_theory():
    return parse_theory((FIXTURES / "fig1.pl").read_text())


@pytest.fixture(scope="session")
def fig2_theory():
    return parse_theory((FIXTURES / "fig2.pl").read_text())


@pytest.fixture(scope="session")
def fig1_engine(fig1_theory):
    return InferenceEngine(fig1_theory)


@pytest.fixture(scope="session")
def fig2_engine(fig2_theory):
    return InferenceEngine(fig2_theory)


@pytest.fixture
def fig1_scenario(fig1_theory):
    return Scenario(fig1_theory)


@pytest.fixture
def fig2_scenario(fig2_theory):
    return Scenario(fig2_theory)


@pytest.fixture(scope="session")
def oracle_chain():
    from oracles import chain_joint

    return chain_joint()


@pytest.fixture(scope="session")
def oracle_infection():
    from oracles import infection_joint

    return infection_joint()
