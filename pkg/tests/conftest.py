import numpy as np
import pytest

from snmcache import RequestTrace


def make_trace(ids, times=None, pre=None, ingress=None, ingress_ids=("cache",), horizon=None):
    """Trace built from a plain id sequence (one request per day-fraction step)."""
    ids = np.asarray(ids, dtype=np.int64)
    n = len(ids)
    t = np.arange(n, dtype=float) * 0.01 if times is None else np.asarray(times, dtype=float)
    p = np.zeros(n, dtype=bool) if pre is None else np.asarray(pre, dtype=bool)
    ing = np.zeros(n, dtype=np.int32) if ingress is None else np.asarray(ingress, dtype=np.int32)
    h = float(t[-1]) if horizon is None and n else (horizon if horizon is not None else 0.0)
    return RequestTrace(t, ids, ing, p, tuple(ingress_ids), horizon=h)


@pytest.fixture
def trace_of():
    return make_trace


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list = []


@pytest.fixture(scope="session")
def verdicts():
    """Collects one summary line per acceptance check."""
    return ACCEPTANCE_LINES


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line[1])
