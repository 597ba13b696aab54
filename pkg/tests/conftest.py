import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from eventplan import load_fixture  # noqa: E402


@pytest.fixture(scope="session")
def logistics():
    """(domain, problem, initial plan) of the bundled package-transport example."""
    return load_fixture(with_plan=True)


@pytest.fixture(scope="session")
def domain(logistics):
    return logistics[0]


@pytest.fixture(scope="session")
def problem(logistics):
    return logistics[1]


@pytest.fixture(scope="session")
def initial_plan(logistics):
    return logistics[2]


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
