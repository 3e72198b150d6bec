import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

REPO = Path(__file__).resolve().parents[1]
os.environ.setdefault("HRBM_DATA_DIR", str(REPO / "data"))

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_tree_text(rng: np.random.Generator, num_nodes: int) -> str:
    """Random rooted tree over ``num_nodes`` nodes, edges listed in shuffled order."""
    parent = {i: int(rng.integers(0, i)) for i in range(1, num_nodes)}
    names = [f"v{i}" for i in range(num_nodes)]
    edge_lines = [f"{names[p]} -> {names[c]}" for c, p in parent.items()]
    edge_lines = [edge_lines[i] for i in rng.permutation(len(edge_lines))]
    leaves = [v for v in range(num_nodes) if v not in parent.values()]
    classes = rng.permutation(len(leaves))
    class_lines = [f"{names[v]} = {k}" for v, k in zip(leaves, classes)]
    return "\n".join(["[edges]", *edge_lines, "[classes]", *class_lines]) + "\n"


@st.composite
def tree_texts(draw, max_nodes=12):
    n = draw(st.integers(min_value=2, max_value=max_nodes))
    seed = draw(st.integers(min_value=0, max_value=2**32 - 1))
    return random_tree_text(np.random.default_rng(seed), n)


def separable_toy(seed: int, n: int = 200, d: int = 16):
    """Two classes, each lighting one half of the features with probability 0.85."""
    rng = np.random.default_rng(seed)
    y = np.repeat([0, 1], n // 2)
    p = np.where((np.arange(d) < d // 2)[None, :] == (y[:, None] == 0), 0.85, 0.15)
    X = (rng.random((n, d)) < p).astype(float)
    return X, y


@pytest.fixture
def five_class_text():
    return (REPO / "src" / "hrbm" / "trees" / "five_class.tree").read_text()
