from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from jointirl.environments import Zone, ZoneGridEnvironment, build_mdp, generate_environment  # noqa: E402
from jointirl.mdp import TabularMdp  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def line_mdp(n=5, gamma=0.95, dim=1):
    """States 0..n-1 in a row, one action moving right; the last state is terminal."""
    nxt = np.array([[min(i + 1, n - 1)] for i in range(n)])
    feats = np.zeros((n, 1, dim))
    feats[:, 0, 0] = -1.0
    term = np.zeros(n, dtype=bool)
    term[-1] = True
    return TabularMdp(nxt, feats, term, gamma)


def self_loop_mdp(n_actions=4, gamma=0.9):
    """One non-terminal state whose every action returns to it with zero reward."""
    nxt = np.zeros((1, n_actions), dtype=int)
    feats = np.zeros((1, n_actions, 1))
    return TabularMdp(nxt, feats, np.zeros(1, dtype=bool), gamma)


@pytest.fixture(scope="session")
def env10():
    return generate_environment(1, (10, 10))


@pytest.fixture(scope="session")
def mdp10(env10):
    return build_mdp(env10)


@pytest.fixture(scope="session")
def open_grid():
    """5x5 grid with a road on the top row, an avoid block and a goal corner."""
    zones = (
        Zone("road", (0, 0, 5, 1), "east"),
        Zone("avoid", (1, 2, 2, 2)),
        Zone("slow", (4, 1, 1, 2)),
    )
    return ZoneGridEnvironment(5, 5, zones, (4, 4), seed=None)


@pytest.fixture(scope="session")
def open_mdp(open_grid):
    return build_mdp(open_grid)
