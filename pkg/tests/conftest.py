from __future__ import annotations

import numpy as np
import pytest

from poincare_fewbody.numerics import make_grid
from poincare_fewbody.threebody import make_jacobi_grid, prepare_faddeev
from poincare_fewbody.twobody import NUCLEON_MASS, MTParameters, malfliet_tjon_kernel


@pytest.fixture(scope="session")
def m():
    return NUCLEON_MASS


@pytest.fixture(scope="session")
def mt_kernel_48():
    return malfliet_tjon_kernel(MTParameters(), make_grid(48, 400.0))


@pytest.fixture(scope="session")
def mt_kernel_96():
    return malfliet_tjon_kernel(MTParameters(), make_grid(96, 400.0))


@pytest.fixture(scope="session")
def small_jacobi():
    return make_jacobi_grid(16, 12, 12)


@pytest.fixture(scope="session")
def small_setups(small_jacobi):
    v = malfliet_tjon_kernel(MTParameters(), small_jacobi.k_grid)
    return {rel: prepare_faddeev(v, NUCLEON_MASS, small_jacobi, rel) for rel in (False, True)}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if config.acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in config.acceptance_lines:
            terminalreporter.write_line(line)
