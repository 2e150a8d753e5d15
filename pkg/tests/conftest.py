"""Shared fixtures.

The expensive default-model computations (stabilization, Y providers,
resonance lists) are session-scoped so the acceptance suite and the module
tests reuse one set of results.
"""
from __future__ import annotations

import time

import pytest

from resonqdt.config import RunConfig
from resonqdt.potential import default_model
from resonqdt.workbench import Workbench


def pytest_configure(config):
    config._acceptance_lines = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", {})
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(lines):
        terminalreporter.write_line(lines[n])


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Callable (n, ok, detail) recording one verdict line per criterion."""
    store = request.config._acceptance_lines

    def log(n, ok, detail):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        store[n] = line
        print(line)
        return ok
    return log


class Timed:
    """Result of a timed call: ``value`` and wall time ``seconds``."""

    def __init__(self, fn):
        t = time.perf_counter()
        self.value = fn()
        self.seconds = time.perf_counter() - t


@pytest.fixture(scope="session")
def V():
    return default_model()


@pytest.fixture(scope="session")
def wb():
    return Workbench(RunConfig())


@pytest.fixture(scope="session")
def stabilization(wb):
    return Timed(wb.stabilization)


@pytest.fixture(scope="session")
def qdt_rotated(wb):
    return Timed(lambda: wb.resonances_qdt(rotated=True))


@pytest.fixture(scope="session")
def qdt_adiabatic(wb, qdt_rotated):
    return Timed(lambda: wb.resonances_qdt(rotated=False))


@pytest.fixture(scope="session")
def bound_both(wb):
    mf = Timed(wb.bound_mfgh)
    qd = Timed(wb.bound_qdt)
    return mf, qd
