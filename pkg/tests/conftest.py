import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from lowrank_bip.problems import coordinate_problem, random_problem, scalar_problem

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def scalar():
    return scalar_problem()


@pytest.fixture
def coordinate():
    return coordinate_problem()


@pytest.fixture(params=[3, 11, 29])
def problem(request):
    return random_problem(request.param)


def random_orthonormal(rng, dim, k):
    Q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
    return Q[:, :k]


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for number in sorted(results):
            terminalreporter.write_line(results[number])
