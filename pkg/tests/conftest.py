"""Shared problems, collars and eigenpair families (computed once per session)."""

import pytest

from agmonlab.agmon import agmon_distance_1d
from agmonlab.core_model import (ModeRule, airy_problem, build_collar, default_r0,
                                 quadratic_problem, sphere_problem)
from agmonlab.spectral import solve_family
from agmonlab.verify import control_fit

SPHERE_R0 = 0.25


class Setup:
    def __init__(self, problem, r0=None):
        self.problem = problem
        self.r0 = default_r0(problem) if r0 is None else r0
        self.collar = build_collar(problem, self.r0)
        self.dE = agmon_distance_1d(problem, self.collar)
        self._family = None

    @property
    def family(self):
        if self._family is None:
            self._family = solve_family(self.problem)
        return self._family


@pytest.fixture(scope="session")
def airy():
    return Setup(airy_problem())


@pytest.fixture(scope="session")
def quadratic():
    return Setup(quadratic_problem())


@pytest.fixture(scope="session")
def sphere():
    return Setup(sphere_problem(), SPHERE_R0)


@pytest.fixture(scope="session")
def sphere_inverse():
    return Setup(sphere_problem(ModeRule("inverse", 1)), SPHERE_R0)


@pytest.fixture(scope="session")
def sphere_control(sphere):
    return control_fit(sphere.family, 0.2, sphere.problem.E)


@pytest.fixture(scope="session")
def sphere_inverse_control(sphere_inverse):
    return control_fit(sphere_inverse.family, 0.2, sphere_inverse.problem.E)


_VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_VERDICTS] = []


@pytest.fixture
def verdict(request):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash[_VERDICTS]

    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} {label}: {detail}"
        lines.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
