import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from .test_acceptance import REPORT

    if REPORT:
        terminalreporter.section("acceptance criteria")
        for block in REPORT:
            terminalreporter.write_line(block)
