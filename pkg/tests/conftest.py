import numpy as np
import pytest

from dryfriction.obstacle_field import ObstacleSpec, empty_field, sample_field
from dryfriction.solver import SolverConfig, TorusGrid

DEFAULT_SPEC = ObstacleSpec(intensity=50.0, radius=0.1, mollification_width=0.04, slab_half_height=1.0,
                            dimension=1, seed=0)


@pytest.fixture(scope="session")
def default_spec():
    return DEFAULT_SPEC


@pytest.fixture(scope="session")
def default_field():
    return sample_field(DEFAULT_SPEC)


@pytest.fixture(scope="session")
def empty():
    return empty_field(DEFAULT_SPEC)


@pytest.fixture(scope="session")
def grid256():
    return TorusGrid(1, 256)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def prox():
    return SolverConfig()


# acceptance reporting ------------------------------------------------------

ACCEPTANCE = {}


def record_criterion(number, ok, detail):
    ACCEPTANCE[number] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
