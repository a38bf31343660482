import itertools

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def naive_rect_sum(values, lo, hi):
    """Explicit nested loop; no numpy slicing."""
    total = 0.0
    for idx in itertools.product(*[range(a, b) for a, b in zip(lo, hi)]):
        total += float(values[idx])
    return total


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[k])
