import pytest

from ancient_neck import acceptance as acc


@pytest.fixture(scope="session")
def soliton():
    return acc.soliton()


@pytest.fixture(scope="session")
def zeta():
    return acc.zeta()


@pytest.fixture(scope="session")
def psi100():
    return acc.barrier_psi(100.0)


CRITERION_LINES = []


def pytest_terminal_summary(terminalreporter):
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)
