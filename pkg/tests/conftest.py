import pytest

from fbmclt.fbm_core import HurstModel
from fbmclt.rng import RngStream
from fbmclt.testfunc import TestFunction


@pytest.fixture
def model04():
    return HurstModel(0.4, 1)


@pytest.fixture
def ref_function():
    """Gaussian difference with sigma1=1, sigma2=2 in d=1."""
    return TestFunction(sigma1=1.0, sigma2=2.0)


@pytest.fixture
def stream():
    return RngStream(12345)



_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance_log(request):
    """Record one verdict line per acceptance criterion, echoed in the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def record(number, title, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title} | {detail}"
        print(line)
        lines.append((number, line))
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
