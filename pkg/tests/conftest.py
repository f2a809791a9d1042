import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from primeq.domain import BCVariant, DomainSpec, make_domain

settings.register_profile(
    "primeq", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.function_scoped_fixture]
)
settings.load_profile("primeq")

ALL_BCS = tuple(BCVariant)


def dom(bc=BCVariant.NEUMANN, n=8, h=1.0, nz=None):
    return make_domain(DomainSpec(h=h, nx=n, ny=n, nz=n if nz is None else nz, bc=bc))


@pytest.fixture(params=ALL_BCS, ids=lambda b: b.value)
def bc(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
