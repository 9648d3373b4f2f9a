import numpy as np
import pytest

from waamlayer.kernels import available_backends

BACKENDS = available_backends()

# Filled by tests/test_acceptance.py, printed after the run.
ACCEPTANCE_LINES = []


@pytest.fixture(params=sorted(BACKENDS))
def backend(request):
    return BACKENDS[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
