import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from dfsq import kernels

settings.register_profile("dfsq", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("dfsq")


def _backends():
    names = ["python"]
    try:
        kernels.backend_module("cython")
        names.append("cython")
    except ImportError:
        pass
    return names


BACKENDS = _backends()


@pytest.fixture(params=BACKENDS)
def backend(request):
    return kernels.backend_module(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import LINES

    if LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
