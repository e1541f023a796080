import numpy as np
import pytest

from pdd.sde import RngStream


@pytest.fixture
def stream():
    return RngStream(20240611)


def within(est, truth, k=3.0, slack=0.0):
    """``|mean - truth| <= k * SE + slack`` with a readable failure message."""
    gap = abs(est.value - truth)
    bound = k * est.std_error + slack
    assert gap <= bound, f"estimate {est.value} vs {truth}: gap {gap:.3g} > {bound:.3g}"


@pytest.fixture
def close_to():
    return within


def unit_square():
    from pdd.geometry import BoxDomain
    return BoxDomain((0.0, 0.0), (1.0, 1.0))


@pytest.fixture
def square():
    return unit_square()


np.seterr(all="raise", under="ignore")


# one summary line per acceptance criterion, echoed after the run
ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
