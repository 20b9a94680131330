import numpy as np
import pytest
from hypothesis import settings

from bfpmg.bfp import BfpBlock, BfpMatrix

settings.register_profile("default", max_examples=100, deadline=None)
settings.load_profile("default")


def block(mant, e=0, q=None):
    """Vector block from a list of ints; width defaults to the minimal one."""
    from bfpmg.wideint import max_msb

    arr = np.empty(len(mant), dtype=object)
    arr[:] = [int(m) for m in mant]
    return BfpBlock(arr, max(max_msb(arr), 1) if q is None else q, e)


@pytest.fixture
def mk():
    return block


__all__ = ["block", "BfpMatrix"]


# acceptance verdicts, printed once at the end of the run
ACCEPTANCE: dict = {}


def verdict(number: int, ok: bool, detail: str) -> None:
    """Record and print the verdict line of one acceptance criterion, then assert it."""
    line = f"CRITERION {number:2d}: {'PASS' if ok else 'FAIL'} | {detail}"
    ACCEPTANCE[number] = line
    print(line)
    assert ok, line


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
