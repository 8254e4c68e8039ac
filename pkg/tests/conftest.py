import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile("default")


def random_spd(rng, n, cond=10.0):
    """SPD matrix with eigenvalues log-uniform in [1, cond]."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    ev = np.exp(rng.uniform(0.0, np.log(cond), n))
    m = (q * ev) @ q.T
    return 0.5 * (m + m.T)


def sandwiched(rng, a, lo, hi):
    """G with relative eigenvalues (w.r.t. ``a``) drawn in [lo, hi], both attained when n >= 2."""
    n = a.shape[0]
    c = np.linalg.cholesky(a)
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    ev = rng.uniform(lo, hi, n)
    if n >= 2:
        ev[0], ev[1] = lo, hi
    g = c @ (q * ev) @ q.T @ c.T
    return 0.5 * (g + g.T)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# PASS/FAIL lines collected by the acceptance suite, echoed after the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
