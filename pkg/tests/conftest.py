import pytest
from hypothesis import HealthCheck, settings

from nilcorr.scalar import IrrationalBasis

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def basis():
    return IrrationalBasis({"b1": "sqrt(2)-1", "b2": "sqrt(3)-1"})


@pytest.fixture(scope="session")
def b1(basis):
    return basis.symbol("b1")


@pytest.fixture(scope="session")
def b2(basis):
    return basis.symbol("b2")


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(LINES):
            terminalreporter.write_line(line)
