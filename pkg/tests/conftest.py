import numpy as np
import pytest
from hypothesis import settings

from eitqnd.herald import calibrate
from eitqnd.model import SystemParams

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def fig2_params():
    """Common parameters of the G-sweep figures, panel (b)."""
    return SystemParams()


@pytest.fixture(scope="session")
def calibrated(fig2_params):
    return calibrate(fig2_params)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_density(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance outcome: ``criterion(number, passed, detail)``."""

    def record(number, passed, detail=""):
        ACCEPTANCE[number] = (bool(passed), detail)
        print(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}")
