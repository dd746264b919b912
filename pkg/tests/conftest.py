import numpy as np
import pytest

from mollified_qft.mollifier import build_damper, convolve_mollifiers, damper_to_mollifier


@pytest.fixture(scope="session")
def damper():
    return build_damper(1.0, 3.0)


@pytest.fixture(scope="session")
def rho(damper):
    return damper_to_mollifier(damper)


@pytest.fixture(scope="session")
def rho_conv(rho):
    return convolve_mollifiers(rho.reflect(), rho)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
