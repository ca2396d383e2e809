from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from filippov_consensus.graph import build_graph  # noqa: E402

SEVEN_NODE_EDGES = [(0, 1, 1), (1, 2, 1), (0, 3, 1), (3, 4, 1), (2, 5, 1), (4, 5, 1), (5, 6, 1), (6, 0, 1)]


@pytest.fixture
def seven_node_graph():
    """Strongly connected seven-node digraph with a constant solution off the edge set."""
    return build_graph(7, SEVEN_NODE_EDGES)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_RESULTS: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[num])
