from pathlib import Path

import numpy as np
import pytest

from aggnash import Box, quadratic_game

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

# the reference game shared by the acceptance scenarios
A_REF = np.array([2.0, 2.5, 3.0, 2.2, 2.8, 2.4])
D_REF = np.array([1.0, 0.8, 1.2, 0.6, 1.0, 0.9])
B_REF = np.array([[1.0, -2.0], [-1.0, 0.5], [2.0, 1.0], [-0.5, -1.5], [0.0, 2.0], [1.5, -1.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def ref_game():
    return quadratic_game(A_REF, B_REF, D_REF, [Box([-5.0, -5.0], [5.0, 5.0])] * 6)


@pytest.fixture
def configs_dir():
    return CONFIGS


def central_diff(f, x, h=1e-6):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h * max(1.0, abs(x[k]))
        g[k] = (f(x + e) - f(x - e)) / (2 * e[k])
    return g


# acceptance lines are echoed in the terminal summary even without -s
_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_log():
    def log(criterion, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {criterion}: {detail}"
        print(line)
        _ACCEPTANCE_LINES.append(line)
        return ok
    return log


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
