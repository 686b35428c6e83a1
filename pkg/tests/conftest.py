import numpy as np
import pytest

from higgshym.geometry import BaseMetric
from higgshym.grid import GridSpec


@pytest.fixture
def grid1():
    return GridSpec.square(1, 16)


@pytest.fixture
def grid2():
    return GridSpec.square(2, 8)


@pytest.fixture
def flat1(grid1):
    return BaseMetric.flat(grid1)


def fd8(f: np.ndarray, h: float, axis: int) -> np.ndarray:
    """Periodic 8th-order central difference along ``axis``."""
    c = [4 / 5, -1 / 5, 4 / 105, -1 / 280]
    out = np.zeros_like(f)
    for k, ck in enumerate(c, start=1):
        out = out + ck * (np.roll(f, -k, axis) - np.roll(f, k, axis))
    return out / h


_ACCEPTANCE: dict = {}


@pytest.fixture
def acceptance():
    """Record ``(criterion, title, passed, detail)`` for the end-of-run summary."""
    def record(k: int, title: str, passed: bool, detail: str) -> None:
        _ACCEPTANCE[k] = f"[{'PASS' if passed else 'FAIL'}] criterion {k:2d}: {title} ({detail})"
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
