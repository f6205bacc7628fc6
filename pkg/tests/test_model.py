import itertools

import pytest
from hypothesis import given, settings, strategies as st

from sqpn.model import (
    NetworkError,
    NodeSpec,
    QualitativeRelation,
    build_emajsat_gadget,
    make_network,
    parse_formula,
    validate_network,
)

from conftest import B, chain_ab


def test_chain_is_valid():
    assert validate_network(chain_ab()).ok


def test_cycle_reported():
    net = make_network([("A", B), ("B", B)],
                       [NodeSpec("A", ("B",), numeric_rows={0: (.5, .5), 1: (.5, .5)}),
                        NodeSpec("B", ("A",), numeric_rows={0: (.5, .5), 1: (.5, .5)})])
    report = validate_network(net)
    assert not report.ok
    assert any("cycle" in v for v in report.violations)


def test_relation_on_ternary_variable_rejected():
    net = make_network([("A", B), ("C", ("c0", "c1", "c2"))],
                       [NodeSpec("A", numeric_rows={0: (.5, .5)}),
                        NodeSpec("C", ("A",), relations=(QualitativeRelation.influence("A", "+"),))])
    report = validate_network(net)
    assert any("non-binary" in v for v in report.violations)


def test_unnormalized_row_and_uncovered_row():
    net = make_network([("A", B), ("B", B)],
                       [NodeSpec("A", numeric_rows={0: (.5, .4)}),
                        NodeSpec("B", ("A",), numeric_rows={0: (.5, .5)})])
    text = "\n".join(validate_network(net).violations)
    assert "sums to" in text
    assert "parent configuration 1" in text


def test_relation_source_must_be_parent():
    net = make_network([("A", B), ("B", B)],
                       [NodeSpec("A", numeric_rows={0: (.5, .5)}),
                        NodeSpec("B", relations=(QualitativeRelation.influence("A", "+"),))])
    assert any("parent" in v for v in validate_network(net).violations)


def test_weak_relation_delta_out_of_range():
    net = make_network([("A", B), ("B", B)],
                       [NodeSpec("A", numeric_rows={0: (.5, .5)}),
                        NodeSpec("B", ("A",), relations=(QualitativeRelation.weak("A", "+", 1.5),))])
    assert any("delta" in v for v in validate_network(net).violations)


@pytest.mark.parametrize("text, world, value", [
    ("X1 | X2", {"X1": False, "X2": True}, True),
    ("X1 & !X1", {"X1": True}, False),
    ("!(X1 & X2) | X3", {"X1": True, "X2": True, "X3": False}, False),
    ("(X1 | !X2) & (X2 | X3)", {"X1": True, "X2": True, "X3": False}, True),
])
def test_formula_parse_and_evaluate(text, world, value):
    assert parse_formula(text).evaluate(world) is value


@pytest.mark.parametrize("text", ["X1 &", "(X1 | X2", "X1 X2", ""])
def test_formula_syntax_errors(text):
    with pytest.raises(ValueError):
        parse_formula(text)


def test_formula_round_trip_through_str():
    phi = parse_formula("(X1 & !X2) | (!X1 & X3)")
    again = parse_formula(str(phi))
    for bits in itertools.product([False, True], repeat=3):
        world = dict(zip(["X1", "X2", "X3"], bits))
        assert phi.evaluate(world) == again.evaluate(world)


def test_gadget_layout_for_disjunction():
    net, query = build_emajsat_gadget(parse_formula("X1 | X2"), 1)
    assert validate_network(net).ok
    assert {"X1", "X2", "E", "Q"} <= set(net.names)
    # one operator node for the single disjunction
    assert len(net.names) == 5
    assert query.target == "Q" and query.evidence == (("E", 0),)
    assert net.node("X1").qualitative
    assert net.node("X2").numeric_rows == {0: (0.5, 0.5)}


def test_gadget_k_out_of_range():
    with pytest.raises(NetworkError):
        build_emajsat_gadget(parse_formula("X1 | X2"), 3)
    with pytest.raises(NetworkError):
        build_emajsat_gadget(parse_formula("X1 | X2"), 0)


@st.composite
def dags(draw):
    n = draw(st.integers(2, 6))
    order = draw(st.permutations(range(n)))
    nodes = []
    for pos, i in enumerate(order):
        before = order[:pos]
        parents = draw(st.lists(st.sampled_from(before), unique=True, max_size=2)) if before else []
        nodes.append((f"V{i}", tuple(f"V{p}" for p in sorted(parents))))
    return nodes


@settings(max_examples=40, deadline=None)
@given(dags(), st.booleans())
def test_topological_order_iff_acyclic(spec, add_cycle):
    parents = dict(spec)
    if add_cycle:
        child = next((n for n, ps in spec if ps), None)
        if child is None:
            return
        parents[parents[child][0]] = tuple(sorted(set(parents[parents[child][0]]) | {child}))
    nodes = []
    for name, ps in parents.items():
        rows = {k: (0.5, 0.5) for k in range(2 ** len(ps))}
        nodes.append(NodeSpec(name, ps, numeric_rows=rows))
    net = make_network([(n, B) for n in parents], nodes)
    report = validate_network(net)
    has_cycle = any("cycle" in v for v in report.violations)
    assert has_cycle == add_cycle
    if not add_cycle:
        order = net.topological_order
        pos = {n: i for i, n in enumerate(order)}
        assert all(pos[p] < pos[n] for n, ps in parents.items() for p in ps)


def test_gadgets_always_validate():
    for text in ["X1 | X2 | X3", "(X1 & X2) | !X3", "X1 & !X1"]:
        phi = parse_formula(text)
        for k in range(1, len(phi.atoms()) + 1):
            net, _ = build_emajsat_gadget(phi, k)
            assert validate_network(net).ok
