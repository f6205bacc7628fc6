import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sqpn.compile import MultilinearProgram
from sqpn.constraints import (
    Monomial,
    MultilinearConstraint,
    compile_interval_assessments,
    compile_network,
    compile_relations,
    polynomial,
    theta,
)
from sqpn.generate import random_numeric_network, random_sqpn
from sqpn.model import NetworkError, NodeSpec, QualitativeRelation, make_network
from sqpn.oracle import relation_residuals
from sqpn.solver import solve

from conftest import B, positive_pair

R = QualitativeRelation


def relation_lines(cs):
    return [str(c) for c in cs.constraints if c.tag != "normalization"]


def test_positive_influence_pair():
    cs = compile_network(positive_pair())
    assert relation_lines(cs) == ["θ[1][0][0] - θ[1][0][1] >= 0  # S+(Y,X)"]
    norms = [c for c in cs.constraints if c.tag == "normalization"]
    assert len(norms) == 2


def test_zero_influence_is_equality():
    net = make_network([("Y", B), ("X", B)],
                       [NodeSpec("Y", numeric_rows={0: (.5, .5)}),
                        NodeSpec("X", ("Y",), relations=(R.influence("Y", "0"),))])
    (c,) = [c for c in compile_relations(net).constraints if c.tag != "normalization"]
    assert c.cmp == "="
    assert str(c) == "θ[1][0][0] - θ[1][0][1] = 0  # S0(Y,X)"


def test_ambiguous_sign_adds_nothing():
    net = make_network([("Y", B), ("X", B)],
                       [NodeSpec("Y", numeric_rows={0: (.5, .5)}),
                        NodeSpec("X", ("Y",), relations=(R.influence("Y", "?"),))])
    assert relation_lines(compile_relations(net)) == []


def test_example4_constraint_list(example4):
    # rows of X: 0 = (y, z), 1 = (y, zbar), 2 = (ybar, z), 3 = (ybar, zbar)
    assert relation_lines(compile_network(example4)) == [
        "θ[2][0][0] - θ[2][0][2] <= 0  # S-(Y,X)",
        "θ[2][0][1] - θ[2][0][3] <= 0  # S-(Y,X)",
        "θ[2][0][0] - θ[2][0][1] >= 0  # S+(Z,X)",
        "θ[2][0][2] - θ[2][0][3] >= 0  # S+(Z,X)",
        "θ[2][0][0]*θ[2][0][3] - θ[2][0][1]*θ[2][0][2] >= 0  # X+({Y,Z},X=0)",
    ]


def _three_parent_net(rel):
    return make_network([("A", B), ("C", B), ("X", B)],
                        [NodeSpec("A", numeric_rows={0: (.5, .5)}),
                         NodeSpec("C", numeric_rows={0: (.5, .5)}),
                         NodeSpec("X", ("A", "C"), relations=(rel,))])


def test_additive_synergy_is_linear():
    (c,) = relation_lines(compile_relations(_three_parent_net(R.additive_synergy("A", "C", "+"))))
    assert c == "θ[2][0][0] + θ[2][0][3] - θ[2][0][2] - θ[2][0][1] >= 0  # Y+({A,C},X)"


def test_situational_influence_single_context():
    rel = R.situational("A", "+", {"C": 1})
    (c,) = relation_lines(compile_relations(_three_parent_net(rel)))
    # context C = 1 selects rows (A=0, C=1) = 1 and (A=1, C=1) = 3
    assert c.startswith("θ[2][0][1] - θ[2][0][3] >= 0")


def test_weak_and_strong_cutoffs():
    weak = relation_lines(compile_relations(_three_parent_net(R.weak("A", "+", 0.2))))
    assert len(weak) == 4
    assert any(line.startswith("θ[2][0][0] - θ[2][0][2] <= 0.2") for line in weak)
    assert any(line.startswith("θ[2][0][0] - θ[2][0][2] >= 0 ") for line in weak)
    strong = relation_lines(compile_relations(_three_parent_net(R.strong("A", "-", 0.3))))
    assert len(strong) == 2
    assert any(line.startswith("θ[2][0][0] - θ[2][0][2] <= -0.3") for line in strong)


def test_interval_row_boxes():
    net = make_network([("A", B), ("X", B)],
                       [NodeSpec("A", numeric_rows={0: (.5, .5)}),
                        NodeSpec("X", ("A",), interval_rows={(0, 0): (0.2, 0.5),
                                                             (0, 1): (0.3, 0.3)})])
    boxes = compile_interval_assessments(net).boxes
    assert boxes[theta(1, 0, 0)] == (0.2, 0.5)
    assert boxes[theta(1, 0, 1)] == (0.3, 0.3)


def test_interval_pair_intersected_through_normalization():
    net = make_network([("X", B)],
                       [NodeSpec("X", interval_rows={(0, 0): (0.6, 0.9), (1, 0): (0.3, 0.5)})])
    cs = compile_network(net)
    t = theta(0, 0, 0)
    values = []
    for sense in ("min", "max"):
        prog = MultilinearProgram(cs, (Monomial(1.0, (t,)),), sense)
        values.append(solve(prog).bound)
    assert values == pytest.approx([0.6, 0.7], abs=1e-7)


def test_inverted_interval_rejected():
    net = make_network([("X", B)], [NodeSpec("X", interval_rows={(0, 0): (0.6, 0.4)})])
    with pytest.raises(NetworkError):
        compile_interval_assessments(net)


def test_polynomial_merges_and_rejects_repeats():
    a, b = theta(0, 0, 0), theta(1, 0, 0)
    monos = polynomial([(1.0, [a, b]), (2.0, [b, a]), (1.0, [a]), (-1.0, [a])])
    assert monos == [Monomial(3.0, (a, b))]
    with pytest.raises(ValueError):
        MultilinearConstraint.build([(1.0, [a, a])], ">=", 0.0)


@pytest.mark.parametrize("seed", range(10))
def test_numeric_network_is_a_single_point(seed):
    rng = np.random.default_rng(seed)
    net = random_numeric_network(rng)
    cs = compile_network(net)
    for v, (lo, hi) in cs.boxes.items():
        assert lo == hi
    point = {v: lo for v, (lo, _) in cs.boxes.items()}
    assert cs.max_violation(point) <= 1e-9


def _sampled_point(net, cs, rng):
    """Independent uniform draws for every free binary entry."""
    point = {}
    for v, (lo, hi) in cs.boxes.items():
        point[v] = lo if lo == hi else None
    for i, spec in enumerate(net.nodes):
        for k in range(net.n_configs(spec.name)):
            a, b = theta(i, 0, k), theta(i, 1, k)
            if point.get(a) is None:
                u = rng.uniform()
                point[a], point[b] = u, 1.0 - u
    return point


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000))
def test_emitted_constraints_imply_relations(seed):
    rng = np.random.default_rng(seed)
    net = random_sqpn(rng)
    cs = compile_network(net)
    for _ in range(300):
        point = _sampled_point(net, cs, rng)
        if not cs.is_feasible(point, tol=0.0):
            continue
        tables = {}
        for i, spec in enumerate(net.nodes):
            K = net.n_configs(spec.name)
            tables[spec.name] = np.array([[[point[theta(i, j, k)] for k in range(K)]
                                           for j in range(2)]])
        for spec in net.nodes:
            for rel in spec.relations:
                for kind, res in relation_residuals(net, spec.name, rel, tables):
                    if kind == "ge":
                        assert res.min() >= -1e-12
                    else:
                        assert np.abs(res).max() <= 1e-12
