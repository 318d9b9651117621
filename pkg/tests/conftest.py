import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

from hypersde.algebra import a34, cp, direct_product, direct_sum  # noqa: E402

ACCEPTANCE_LINES = []


def builtin_set():
    return {
        "Cp(-1)": cp(-1),
        "Cp(0)": cp(0),
        "Cp(1)": cp(1),
        "A3_4": a34(),
        "Cp(-1)xA3_4": direct_product(cp(-1), a34()),
        "Cp(-1)+Cp(1)": direct_sum(cp(-1), cp(1)),
    }


@pytest.fixture(scope="session")
def algebras():
    return builtin_set()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
