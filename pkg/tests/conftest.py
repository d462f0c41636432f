import numpy as np
import pytest

from unisample import Dataset


def line(*xs, labels=None):
    """Dataset of 1-d points."""
    return Dataset(np.asarray(xs, dtype=float).reshape(-1, 1), labels=labels)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def criterion():
    """Record and print one ``PASS``/``FAIL`` line for an acceptance criterion."""

    def report(number: int, passed: bool, detail: str) -> bool:
        line = f"{'PASS' if passed else 'FAIL'} criterion {number}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
