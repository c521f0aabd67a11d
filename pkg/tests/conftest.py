"""Shared fixtures: small canonical graphs and the lesmis dataset."""

from pathlib import Path

import numpy as np
import pytest

from layoutgen.graphs import build_graph, largest_component, load_graph

DATA_DIR = Path(__file__).resolve().parent.parent / "data"
LESMIS = DATA_DIR / "lesmis.edgelist"


@pytest.fixture(scope="session")
def lesmis():
    if not LESMIS.exists():
        pytest.skip(f"lesmis dataset not found at {LESMIS}")
    return largest_component(load_graph(str(LESMIS), "edge-list"))


@pytest.fixture
def path3():
    return build_graph(3, [(0, 1), (1, 2)])


@pytest.fixture
def k4():
    return build_graph(4, [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])


@pytest.fixture
def twin_graph():
    # 2 and 3 are non-adjacent twins (same neighborhood {0, 1});
    # 4 and 5 are adjacent twins hanging off node 1.
    return build_graph(6, [(0, 2), (1, 2), (0, 3), (1, 3), (1, 4), (1, 5), (4, 5), (0, 1)])


@pytest.fixture
def rng():
    return np.random.default_rng(0)
