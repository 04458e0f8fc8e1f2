import numpy as np
import pytest
from hypothesis import settings

# first calls pay for numba compilation and mpmath setup
settings.register_profile("default", deadline=None)
settings.load_profile("default")

_ACCEPTANCE = {}


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(name, ok, detail):
        _ACCEPTANCE[name] = f"{name} {'PASS' if ok else 'FAIL'}  {detail}"
        assert ok, f"{name}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda n: int(n[1:])):
        terminalreporter.write_line(_ACCEPTANCE[name])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
