import numpy as np
import pytest

from locmem._accel import HAS_NUMBA

BACKENDS = ["numpy"] + (["numba"] if HAS_NUMBA else [])


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# ---------------------------------------------------------------- acceptance report

_ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line: ``acceptance(criterion, passed, detail)``."""
    lines = request.config.stash[_ACCEPTANCE_KEY]

    def record(criterion, passed, detail):
        line = f"criterion {criterion:>3}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append((criterion, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines, key=lambda x: (int(str(x[0]).rstrip("abc*")), str(x[0]))):
        terminalreporter.write_line(line)
