import numpy as np
import pytest

from ncofdm.config import build_system_config, lte_config

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def tiny():
    """K=8, N=32, N_cp=4, V=1: small enough for dense oracles."""
    return build_system_config(8, 32, 4, 1)


@pytest.fixture
def small():
    return build_system_config(64, 256, 16, 2)


@pytest.fixture
def lte():
    return lte_config(2)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
