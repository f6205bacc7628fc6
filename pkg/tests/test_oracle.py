import itertools

import numpy as np
import pytest

from sqpn.learn import Counts
from sqpn.model import (
    EvidenceImpossible,
    NetworkError,
    NodeSpec,
    QualitativeRelation,
    Query,
    build_emajsat_gadget,
    make_network,
    parse_formula,
)
from sqpn.generate import random_numeric_network
from sqpn.oracle import GridSpec, emajsat_brute, grid_bounds, grid_ml, numeric_ve

from conftest import B, chain_ab, positive_pair


# -- numeric enumeration ------------------------------------------------------

def test_chain_marginal_and_conditional():
    net = chain_ab()
    assert numeric_ve(net, "B", 0) == pytest.approx(0.5, abs=1e-15)
    assert numeric_ve(net, "B", 0, {"A": 0}) == pytest.approx(0.8, abs=1e-15)
    # Bayes: 0.5 * 0.8 / 0.5
    assert numeric_ve(net, "A", 0, {"B": 0}) == pytest.approx(0.8, abs=1e-15)


def test_impossible_evidence_raises():
    net = make_network([("A", B), ("C", B)],
                       [NodeSpec("A", numeric_rows={0: (1.0, 0.0)}),
                        NodeSpec("C", ("A",), numeric_rows={0: (1.0, 0.0), 1: (0.5, 0.5)})])
    with pytest.raises(EvidenceImpossible):
        numeric_ve(net, "A", 0, {"C": 1})


def test_table_override():
    net = chain_ab()
    cpts = {"A": np.array([[0.2], [0.8]])}
    assert numeric_ve(net, "B", 0, cpts=cpts) == pytest.approx(0.2 * 0.8 + 0.8 * 0.2, abs=1e-15)


@pytest.mark.parametrize("text, k", [("(X1 | X2) & X3", 1), ("(X1 & X2) | X3", 2),
                                      ("X1 | X2 | X3", 1)])
def test_gadget_world_counts(text, k):
    phi = parse_formula(text)
    net, _ = build_emajsat_gadget(phi, k)
    w0 = net.node("Q").parents[0]
    xs = [f"X{i + 1}" for i in range(3)]
    for bits in itertools.product((True, False), repeat=k):
        cpts = {x: np.array([[float(b)], [1.0 - b]]) for x, b in zip(xs, bits)}
        fixed = dict(zip(xs, bits))
        tail = xs[k:]
        sat = sum(phi.evaluate({**fixed, **dict(zip(tail, ys))})
                  for ys in itertools.product((True, False), repeat=len(tail)))
        assert numeric_ve(net, w0, 0, cpts=cpts) == pytest.approx(sat / 2 ** len(tail),
                                                                  abs=1e-12)


# -- grid bounds --------------------------------------------------------------

def test_free_root_grid():
    net = make_network([("A", B)], [NodeSpec("A", interval_rows={(0, 0): (0.2, 0.8)})])
    res = grid_bounds(net, Query.make("A", 0), GridSpec(step=0.05), kind="marginal")
    assert res.lo == pytest.approx(0.2, abs=0.05) and res.hi == pytest.approx(0.8, abs=0.05)
    assert 0.2 - 1e-9 <= res.lo <= res.hi <= 0.8 + 1e-9


def test_positive_influence_grid():
    res = grid_bounds(positive_pair(), Query.make("X", 0, {"Y": 0}), GridSpec(step=0.05))
    assert res.lo == pytest.approx(0.0, abs=0.05)
    assert res.hi == pytest.approx(0.5, abs=0.05)


def test_numeric_net_grid_is_degenerate():
    net = random_numeric_network(np.random.default_rng(4), n_nodes=5)
    target, ev = net.names[-1], net.names[0]
    res = grid_bounds(net, Query.make(target, 0, {ev: 0}), kind="marginal")
    assert res.lo == res.hi == pytest.approx(numeric_ve(net, target, 0, {ev: 0}), abs=1e-12)


def test_influence_needs_evidence():
    with pytest.raises(NetworkError):
        grid_bounds(positive_pair(), Query.make("X", 0))


def test_grid_step_validated():
    with pytest.raises(ValueError):
        GridSpec(step=0.0)
    with pytest.raises(ValueError):
        GridSpec(step=0.6)


# -- grid maximum likelihood --------------------------------------------------

def _pair(sign):
    net = make_network([("A", B), ("X", B)],
                       [NodeSpec("A", qualitative=True),
                        NodeSpec("X", ("A",), relations=(QualitativeRelation.influence("A", sign),))])
    return net


def test_unconstrained_grid_ml_is_frequency():
    net = make_network([("A", B)], [NodeSpec("A", qualitative=True)])
    res = grid_ml(net, Counts.from_tables(net, {"A": [[7], [13]]}))
    assert res.estimates["A"][0, 0] == pytest.approx(0.35, abs=1e-12)


def test_equality_family_pools():
    net = _pair("0")
    res = grid_ml(net, Counts.from_tables(net, {"A": [[11], [19]], "X": [[2, 9], [9, 10]]}))
    assert res.estimates["X"][0] == pytest.approx([11 / 30, 11 / 30], abs=1e-3)


def test_order_constraint_pools_when_violated():
    net = _pair("+")
    res = grid_ml(net, Counts.from_tables(net, {"A": [[10], [10]], "X": [[3, 5], [7, 5]]}))
    assert res.estimates["X"][0] == pytest.approx([0.4, 0.4], abs=1e-3)


# -- EMAJSAT ------------------------------------------------------------------

@pytest.mark.parametrize("text, k, answer", [
    ("X1 | X2", 1, True),
    ("X1 & !X1", 1, False),
    ("X1 & X2", 1, False),
    ("X1 & X2", 2, True),
    ("(X1 | X2) & X3", 1, False),
])
def test_emajsat_examples(text, k, answer):
    assert emajsat_brute(parse_formula(text), k) is answer


def test_emajsat_k_range():
    with pytest.raises(ValueError):
        emajsat_brute(parse_formula("X1 | X2"), 3)
