import numpy as np
import pytest

from rotwave.functionals import ModelParams
from rotwave.grid import GridSpec, build_grid


@pytest.fixture(scope="session")
def grid2():
    return build_grid(GridSpec.uniform(2, 8.0, 64))


@pytest.fixture(scope="session")
def grid2_fine():
    return build_grid(GridSpec.uniform(2, 8.0, 128))


@pytest.fixture(scope="session")
def grid3():
    return build_grid(GridSpec.uniform(3, 6.0, 32))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def params2():
    return ModelParams(dim=2, p=3.0, omega=0.5)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance") or __import__("sys").modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
