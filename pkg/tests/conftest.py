import numpy as np
import pytest

from repfwd._backend import get_kernels
from repfwd.game import REFERENCE_LINKS, GameParams

_ACCEPTANCE_LINES = []


def record_acceptance(line: str) -> None:
    """Collect one acceptance verdict line for the end-of-session summary."""
    print(line)
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def ref_params():
    return GameParams(b=4.0, c=2.0, p_e=0.01, mu=0.1, beta=10.0, omega=0.02, L=4, N=500)


@pytest.fixture
def ref_links():
    return REFERENCE_LINKS


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(params=["c", "python"])
def kernels(request):
    return get_kernels(request.param)


@pytest.fixture
def acceptance():
    return record_acceptance
