import numpy as np
import pytest

from sqpn.data import fixture_path, load_network
from sqpn.learn import Counts
from sqpn.model import NodeSpec, QualitativeRelation, make_network

B = ("t", "f")

# Example 4 table of X counts: rows x / xbar, columns yz, yzbar, ybarz, ybarzbar
EXAMPLE4_X = np.array([[3, 6, 8, 1], [3, 14, 2, 3]])


def chain_ab(p_b_given_a=0.8):
    """A -> B with P(a) = 0.5, P(b|a) = p, P(b|abar) = 0.2."""
    return make_network(
        [("A", B), ("B", B)],
        [NodeSpec("A", numeric_rows={0: (0.5, 0.5)}),
         NodeSpec("B", ("A",), numeric_rows={0: (p_b_given_a, 1 - p_b_given_a),
                                             1: (0.2, 0.8)})])


def positive_pair():
    """Y -> X with P(y) = 0.5 and S+(Y, X)."""
    return make_network(
        [("Y", ("y", "ybar")), ("X", ("x", "xbar"))],
        [NodeSpec("Y", numeric_rows={0: (0.5, 0.5)}),
         NodeSpec("X", ("Y",), relations=(QualitativeRelation.influence("Y", "+"),))])


@pytest.fixture
def example4():
    return load_network(fixture_path("example4.net").read_text())


@pytest.fixture
def example5():
    return load_network(fixture_path("example5.net").read_text())


@pytest.fixture
def example4_counts(example4):
    return Counts.from_tables(example4, {"Y": [[26], [14]], "Z": [[16], [24]],
                                         "X": EXAMPLE4_X})


@pytest.fixture
def example5_counts(example5):
    return Counts.from_tables(example5, {"Y": [[29], [11]], "Z": [[25], [15]],
                                         "X": EXAMPLE4_X})


# one line per acceptance criterion, printed after the run
ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
