import pytest
from hypothesis import HealthCheck, settings

from fptcross import make_boundary

settings.register_profile(
    "fpt", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("fpt")


@pytest.fixture(scope="session")
def linear():
    return make_boundary("linear", 1.0, [1.0])


@pytest.fixture(scope="session")
def quadratic():
    return make_boundary("quadratic", 1.0, [0.0, 0.5])


@pytest.fixture(scope="session")
def flat():
    return make_boundary("polynomial", 1.0, [0.0])


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
