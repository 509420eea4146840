from __future__ import annotations

import functools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from porothermo.config import DEFAULTS  # noqa: E402
from porothermo.measures import surface_measures, verify_decay  # noqa: E402
from porothermo.simulator import run  # noqa: E402

SIGMAS = (0.5, 1.0, 2.0)
DECOUPLED = {"D": 0.0, "B": 0.0, "b": 0.0, "Mc": 0.0, "a": 0.0, "m": 0.0}


@functools.lru_cache(maxsize=None)
def default_run(N: int = DEFAULTS["grid"]["N"]):
    """Default heat-pulse scenario at N cells, cached for the whole session."""
    return run({"grid": {"N": N}})


@pytest.fixture(scope="session")
def default_traj():
    return default_run()


@pytest.fixture(scope="session")
def default_measures(default_traj):
    return surface_measures(default_traj, SIGMAS)


@pytest.fixture(scope="session")
def default_report(default_traj, default_measures):
    return verify_decay(default_traj, SIGMAS, measures=default_measures)


@pytest.fixture(scope="session")
def refinement():
    """Default scenario at N = 200, 400, 800 (dt scales with dx)."""
    return {N: default_run(N) for N in (200, 400, 800)}


# -- acceptance summary -------------------------------------------------------

_criteria: dict[str, list] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(id, text): acceptance criterion covered by a test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    crit = getattr(report, "_criterion", None)
    if crit is None:
        return
    cid, text = crit
    entry = _criteria.setdefault(cid, [text, True])
    entry[1] = entry[1] and report.outcome == "passed"


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        rep._criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_criteria, key=lambda c: int(c[1:])):
        text, ok = _criteria[cid]
        terminalreporter.write_line(f"{cid:<4} {'PASS' if ok else 'FAIL'}  {text}")
