import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qfd import graphs  # noqa: E402

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# graph spec, detection node, every node label
EXAMPLE_GRAPHS = {
    "ring6": (graphs.ring(6), 6, list(range(1, 7))),
    "square_center": (graphs.square_center(), 0, list(range(5))),
    "square_corner": (graphs.square_center(), 1, list(range(5))),
    "complete5": (graphs.complete(5), 0, list(range(5))),
    "star4_center": (graphs.star(4), 0, list(range(5))),
    "star4_rim": (graphs.star(4), 1, list(range(5))),
    "hypercube3": (graphs.hypercube(3), 0, list(range(8))),
    "tree_root": (graphs.binary_tree(), 0, list(range(7))),
    "tree_middle": (graphs.binary_tree(), 1, list(range(7))),
    "tree_leaf": (graphs.binary_tree(), 3, list(range(7))),
}


@pytest.fixture(params=sorted(EXAMPLE_GRAPHS))
def example_graph(request):
    return EXAMPLE_GRAPHS[request.param]


@pytest.fixture
def rng():
    return np.random.default_rng(20191015)


def two_level_fixture(psi_in, E1=-0.7, E2=1.9):
    """Two doubly degenerate levels with ``<P_1>_d = <P_2>_d = 1/2``.

    Returns ``(H, psi_d, psi_in, nu1, nu2)`` with ``nu_l`` computed by hand:
    ``psi_d = (e_0 + e_2) / sqrt 2`` so ``nu_1 = sqrt2 psi_in[0]`` and
    ``nu_2 = sqrt2 psi_in[2]``.
    """
    H = np.diag([E1, E1, E2, E2]).astype(complex)
    psi_d = np.array([1, 0, 1, 0], dtype=complex) / np.sqrt(2)
    nu1 = np.sqrt(2) * psi_in[0]
    nu2 = np.sqrt(2) * psi_in[2]
    return H, psi_d, psi_in, nu1, nu2
