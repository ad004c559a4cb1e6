import numpy as np
import pytest

from kaonlab.meson import kaon_params, make_params


@pytest.fixture
def kaon():
    """Default kaon parameters with CP violation."""
    return kaon_params()


@pytest.fixture
def kaon_cp0():
    """Kaon parameters with epsilon = 0."""
    return make_params(0.47, 581.0, 0.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
