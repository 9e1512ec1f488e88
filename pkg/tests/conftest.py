import pytest
from hypothesis import HealthCheck, settings

from adiclab.symbolic import shipped_system

settings.register_profile(
    "default",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def cantor():
    return shipped_system("cantor3")


@pytest.fixture(scope="session")
def golden():
    return shipped_system("golden_mean")


@pytest.fixture(scope="session")
def full2():
    return shipped_system("full2")


@pytest.fixture(scope="session")
def countable():
    return shipped_system("countable3")


@pytest.fixture(scope="session")
def fixed0():
    return shipped_system("fixed0")


@pytest.fixture(scope="session")
def period2():
    return shipped_system("period2")


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
