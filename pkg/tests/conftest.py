import numpy as np
import pytest

from transell.positive_mle import random_m_matrix

_ACCEPTANCE = {}


def random_spd(rng, d, cond=50.0):
    q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    w = np.exp(rng.uniform(0.0, np.log(cond), d))
    return (q * w) @ q.T


def random_corr(rng, d):
    a = random_spd(rng, d)
    sd = np.sqrt(np.diag(a))
    return a / sd[:, None] / sd[None, :]


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def m_matrix():
    return lambda d, seed=0, **kw: random_m_matrix(d, np.random.default_rng(seed), **kw)


@pytest.fixture
def record_criterion():
    """Register a pass/fail line for the acceptance summary."""

    def _record(number, title, passed, detail=""):
        _ACCEPTANCE[number] = (title, bool(passed), detail)
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        title, passed, detail = _ACCEPTANCE[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{status}] {number:>2}. {title}" + (f" ({detail})" if detail else ""))
