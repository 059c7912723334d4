import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from rotnsk.grid import GridSpec

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile("default")


@pytest.fixture
def grid16():
    return GridSpec(2 * np.pi, 16)


@pytest.fixture
def grid32():
    return GridSpec(2 * np.pi, 32)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_real_samples(grid, rng, rank="scalar"):
    shape = grid.shape if rank == "scalar" else (3,) + grid.shape
    return rng.normal(size=shape)


CRITERIA: dict[str, str] = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(n, passed, detail)``."""

    def record(n, passed: bool, detail: str) -> bool:
        CRITERIA[str(n)] = f"{'PASS' if passed else 'FAIL'} criterion {n}: {detail}"
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA, key=lambda k: (int("".join(c for c in k if c.isdigit())), k)):
        terminalreporter.write_line(CRITERIA[n])
