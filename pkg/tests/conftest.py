import os

import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def representable_values(fmt):
    """Every nonnegative finite value of ``fmt``, sorted, with its significand parity.

    Built directly from the (t, e_min, e_max) definition, independently of
    the rounding code.
    """
    t, e_min, e_max = fmt.t, fmt.e_min, fmt.e_max
    vals, mants = [], []
    q = 2.0 ** (e_min - t + 1)
    for m in range(0, 2 ** (t - 1)):  # zero and subnormals
        vals.append(m * q)
        mants.append(m)
    for e in range(e_min, e_max + 1):
        q = 2.0 ** (e - t + 1)
        for m in range(2 ** (t - 1), 2**t):
            vals.append(m * q)
            mants.append(m)
    return np.array(vals), np.array(mants)


def brute_force_round(x, fmt, table=None):
    """Nearest representable value by exhaustive search, ties to even significand."""
    vals, mants = table if table is not None else representable_values(fmt)
    ax = abs(x)
    overflow_at = fmt.x_max + 2.0 ** (fmt.e_max - fmt.t)  # halfway to the next power
    if ax >= overflow_at:
        return float(np.copysign(np.inf, x))
    i = int(np.searchsorted(vals, ax))
    cands = [j for j in (i - 1, i) if 0 <= j < len(vals)]
    best = min(cands, key=lambda j: (abs(vals[j] - ax), mants[j] % 2))
    return float(np.copysign(vals[best], x))


@pytest.fixture(params=["numba", "numpy"])
def backend(request):
    from mixkmeans import kernels

    with kernels.use_backend(request.param):
        yield request.param


# ---------------------------------------------------------------------------
# acceptance reporting: one PASS/FAIL line per criterion in the summary
# ---------------------------------------------------------------------------

_CRITERIA = {}


class _Criterion:
    def __init__(self, number, title):
        self.number, self.title, self.detail = number, title, ""

    def note(self, text):
        self.detail = text

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        _CRITERIA[self.number] = (status, self.title, self.detail)
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, title, detail = _CRITERIA[number]
        line = f"criterion {number:>2}: {status}  {title}"
        terminalreporter.write_line(line + (f"  [{detail}]" if detail else ""))
