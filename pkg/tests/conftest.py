"""Shared fixtures: reference problem instances reused across modules."""

import math

import pytest

from membrane_logistic import Geometry, ProblemSpec, RefugeRegion
from membrane_logistic.discretize import discretize

_ACCEPTANCE_LINES = []


def record_acceptance(line: str) -> None:
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def sym_spec():
    """Symmetric non-degenerate interval: threshold at pi**2 for any mu."""
    return ProblemSpec(Geometry("interval", (0.0, 1.0), 0.5), mu=1.0, p=2.0)


@pytest.fixture(scope="session")
def sym_disc(sym_spec):
    return discretize(sym_spec, 256)


@pytest.fixture(scope="session")
def decoupled_spec():
    """mu = 0 with an off-center membrane: the two sides separate."""
    return ProblemSpec(Geometry("interval", (0.0, 1.0), 1.0 / 3.0),
                       mu=0.0, p=2.0)


@pytest.fixture(scope="session")
def two_refuge_spec():
    """Degenerate reference: refuges (0.2, 0.3) and (0.6, 0.8)."""
    return ProblemSpec(
        Geometry("interval", (0.0, 1.0), 0.5), mu=1.0, p=3.0,
        a1=100.0, a2=100.0,
        refuges=(RefugeRegion(1, (0.2, 0.3)), RefugeRegion(2, (0.6, 0.8))),
    )


@pytest.fixture(scope="session")
def two_refuge_disc(two_refuge_spec):
    # 640 cells per side aligns both refuge boxes with grid nodes.
    return discretize(two_refuge_spec, 640)


@pytest.fixture(scope="session")
def equal_case_spec():
    """Equal-size refuges: both components blow up together."""
    return ProblemSpec(
        Geometry("interval", (0.0, 1.0), 0.5), mu=1.0, p=3.0,
        a1=100.0, a2=100.0,
        refuges=(RefugeRegion(1, (0.2, 0.25)),
                 RefugeRegion(2, (0.7, 0.75))),
    )


@pytest.fixture(scope="session")
def equal_case_disc(equal_case_spec):
    return discretize(equal_case_spec, 640)


@pytest.fixture(scope="session")
def pi2():
    return math.pi ** 2
