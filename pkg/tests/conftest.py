"""Shared fixtures: named instances, random law generators and hypothesis profiles."""

from __future__ import annotations

import json
import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from exponent_lab import ProblemInstance

TESTS = Path(__file__).resolve().parent
sys.path.insert(0, str(TESTS))

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.register_profile("ci", max_examples=15, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

TABLE1 = ([0.3, 0.3, 0.4], [0.4, 0.5, 0.1], [0.1, 0.7, 0.2])
FIG1 = ([0.9, 0.1], [0.2, 0.8])
FIG3 = ([0.25, 0.75], [0.28, 0.72], [0.22, 0.78])
FIG3_LAMBDAS = (0.004, 0.0008, 0.0009)


@pytest.fixture
def table1_instance():
    return ProblemInstance(TABLE1, alpha=1.0)


@pytest.fixture
def fig1_instance():
    return ProblemInstance(FIG1, alpha=300.0, k=20.0)


@pytest.fixture
def fig3_instance():
    return ProblemInstance(FIG3, alpha=8.0, k=3.0)


@pytest.fixture
def binary_instance():
    return ProblemInstance(([0.8, 0.2], [0.3, 0.7]), alpha=1.0, k=2.0)


@pytest.fixture(scope="session")
def oracle_corpus():
    return json.loads((TESTS / "data" / "oracle_corpus.json").read_text(encoding="utf-8"))


def random_law(rng: np.random.Generator, d: int, floor: float = 0.02) -> np.ndarray:
    """Dirichlet draw pushed away from the simplex boundary."""
    p = rng.dirichlet(np.ones(d))
    p = floor + (1 - d * floor) * p
    return p / p.sum()


def random_pair(rng: np.random.Generator, d: int, min_gap: float = 0.02):
    while True:
        p, q = random_law(rng, d), random_law(rng, d)
        if np.abs(p - q).max() > min_gap:
            return p, q


@st.composite
def laws(draw, d=None, floor=0.02):
    """Hypothesis strategy for interior laws on an alphabet of size 2..4."""
    d = draw(st.integers(2, 4)) if d is None else d
    w = draw(st.lists(st.floats(0.05, 1.0), min_size=d, max_size=d))
    p = np.asarray(w) / sum(w)
    return floor + (1 - d * floor) * p


# ---------------------------------------------------------------------------
# session bookkeeping for the acceptance suite
# ---------------------------------------------------------------------------

ACCEPTANCE_FILE = "test_acceptance.py"
_OUTCOMES: dict[str, str] = {}


def pytest_collection_modifyitems(items):
    # acceptance criteria run last so the property criterion can read this session's results
    items.sort(key=lambda item: item.path.name == ACCEPTANCE_FILE)


def pytest_runtest_logreport(report):
    if report.when == "call" or report.outcome != "passed":
        if _OUTCOMES.get(report.nodeid) in (None, "passed"):
            _OUTCOMES[report.nodeid] = report.outcome


@pytest.fixture(scope="session")
def session_outcomes() -> dict[str, str]:
    """Outcome of every test that ran before the requesting test, keyed by node id."""
    return _OUTCOMES


def pytest_terminal_summary(terminalreporter):
    lines = [
        value
        for reports in terminalreporter.stats.values()
        for rep in reports
        for key, value in getattr(rep, "user_properties", ())
        if key == "acceptance"
    ]
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(set(lines), key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
