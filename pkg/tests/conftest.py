import numpy as np
import pytest

from chronoml.data import from_arrays


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def seasonal_panel():
    """Two noisy trend + sine series of length 120 with period 12."""
    t = np.arange(120)
    gen = np.random.default_rng(0)
    arrays = [
        20 + 0.1 * t + 5 * np.sin(2 * np.pi * t / 12) + gen.normal(0, 0.3, t.size),
        50 - 0.05 * t + 8 * np.sin(2 * np.pi * t / 12 + 1) + gen.normal(0, 0.3, t.size),
    ]
    return from_arrays("seasonal", arrays, horizon=12, seasonal_period=12)


def write_text(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion, then assert it."""

    def record(number, title, passed, detail=""):
        line = f"AC{number:<2d} {'PASS' if passed else 'FAIL'}  {title}"
        if detail:
            line += f"  ({detail})"
        ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
