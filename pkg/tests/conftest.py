import numpy as np
import pytest

from phylocsp.tree import Tree

# reconstructed figure trees used across modules
ANIMALS = Tree.from_newick("(((whale,dolphin),tuna),(lion,tiger));")
TREE_I = Tree.from_newick("((a,(b,e)),(c,d));")
TREE_II = Tree.from_newick("((b,a),(c,d));")
TREE_III = Tree.from_newick("((z,a),(b,c));")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
