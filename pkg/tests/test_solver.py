import numpy as np
import pytest

from sqpn.compile import MultilinearProgram, pose_influence_query, pose_marginal_query
from sqpn.constraints import (
    ConstraintSet,
    Monomial,
    MultilinearConstraint,
    compile_network,
    theta,
)
from sqpn.generate import random_query, random_sqpn
from sqpn.lp import LinearProgram, lp_solve
from sqpn.model import NodeSpec, Query, make_network
from sqpn.data import network_to_dict, network_from_dict
from sqpn.oracle import GridSpec, grid_bounds, numeric_ve
from sqpn.solver import Box, SolverOptions, local_refine, relax_mccormick, solve

from conftest import B


def product_program(u_box=(0.0, 1.0), v_box=(0.0, 1.0), sense="max"):
    cs = ConstraintSet()
    u, v = theta(0, 0, 0), theta(1, 0, 0)
    cs.declare(u, *u_box)
    cs.declare(v, *v_box)
    return MultilinearProgram(cs, (Monomial(1.0, (u, v)),), sense), u, v


def envelope_range(lp, fixed):
    """Min and max of the product column with some columns pinned."""
    n = lp.n
    A_eq = np.vstack([lp.A_eq.reshape(-1, n)] + [np.eye(n)[[i]] for i in fixed])
    b_eq = np.concatenate([lp.b_eq, list(fixed.values())])
    out = []
    for s in (1.0, -1.0):
        c = np.zeros(n)
        c[n - 1] = s
        res = lp_solve(LinearProgram(c, lp.A_ub, lp.b_ub, A_eq, b_eq, lp.lo, lp.hi))
        out.append(s * res.value)
    return out


# -- LP -----------------------------------------------------------------------

def _lp(c, A_ub=(), b_ub=(), lo=None, hi=None):
    c = np.asarray(c, float)
    n = len(c)
    A_ub = np.asarray(A_ub, float).reshape(-1, n)
    return LinearProgram(c, A_ub, np.asarray(b_ub, float), np.zeros((0, n)), np.zeros(0),
                         np.zeros(n) if lo is None else np.asarray(lo, float),
                         np.ones(n) if hi is None else np.asarray(hi, float))


def test_lp_box_maximum():
    res = lp_solve(_lp([-1.0]))
    assert res.optimal and -res.value == pytest.approx(1.0)


def test_lp_simplex_maximum():
    res = lp_solve(_lp([-1.0, -1.0], [[1.0, 1.0]], [1.0], hi=[5.0, 5.0]))
    assert res.optimal and -res.value == pytest.approx(1.0)


def test_lp_infeasible():
    # x >= 2 and x <= 1
    res = lp_solve(_lp([1.0], [[-1.0], [1.0]], [-2.0, 1.0], lo=[-10.0], hi=[10.0]))
    assert res.status == "infeasible"


def test_lp_requires_finite_bounds():
    with pytest.raises(ValueError):
        lp_solve(_lp([1.0], lo=[-np.inf]))


# -- McCormick ----------------------------------------------------------------

def test_unit_box_envelope():
    prog, u, v = product_program()
    lp = relax_mccormick(prog)
    for point, (lo, hi) in {(0.5, 0.5): (0.0, 0.5), (1.0, 0.3): (0.3, 0.3),
                            (0.7, 0.6): (0.3, 0.6)}.items():
        assert envelope_range(lp, {0: point[0], 1: point[1]}) == pytest.approx([lo, hi])


def test_fixed_factor_collapses_envelope():
    prog, u, v = product_program(u_box=(0.5, 0.5))
    lp = relax_mccormick(prog)
    for x in (0.0, 0.4, 1.0):
        assert envelope_range(lp, {1: x}) == pytest.approx([0.5 * x, 0.5 * x])


def test_envelope_gap_at_midpoint():
    prog, u, v = product_program((0.2, 0.8), (0.3, 0.7))
    lp = relax_mccormick(prog)
    lo, hi = envelope_range(lp, {0: 0.5, 1: 0.5})
    assert 0.25 - lo == pytest.approx(0.06)
    assert hi - 0.25 == pytest.approx(0.06)


def test_relaxation_over_sub_box():
    prog, u, v = product_program()
    lp = relax_mccormick(prog, Box(np.array([0.5, 0.5]), np.array([1.0, 1.0])))
    assert envelope_range(lp, {0: 0.75, 1: 0.75})[0] == pytest.approx(0.5)


# -- branch and bound ---------------------------------------------------------

def test_numeric_program_converges_immediately():
    net = make_network([("A", B), ("C", B)],
                       [NodeSpec("A", numeric_rows={0: (0.3, 0.7)}),
                        NodeSpec("C", ("A",), numeric_rows={0: (0.9, 0.1), 1: (0.2, 0.8)})])
    res = solve(pose_marginal_query(net, Query.make("C", 0)))
    assert res.converged and res.gap == 0.0
    assert res.bound == pytest.approx(numeric_ve(net, "C", 0))


def test_bilinear_toy():
    cs = ConstraintSet()
    a, b = theta(0, 0, 0), theta(0, 1, 0)
    cs.declare(a)
    cs.declare(b)
    cs.add(MultilinearConstraint.build([(1.0, [a]), (1.0, [b])], "=", 1.0, tag="normalization"))
    res = solve(MultilinearProgram(cs, (Monomial(1.0, (a, b)),), "max"))
    assert res.converged
    assert res.bound == pytest.approx(0.25, abs=1e-4)
    assert res.point[a] == pytest.approx(0.5, abs=1e-2)


def test_infeasible_program_reported():
    cs = ConstraintSet()
    a = theta(0, 0, 0)
    cs.declare(a)
    cs.add(MultilinearConstraint.build([(1.0, [a])], ">=", 2.0))
    assert solve(MultilinearProgram(cs, (Monomial(1.0, (a,)),))).status == "infeasible"


def uniform_example4(net):
    doc = network_to_dict(net)
    for node in doc["nodes"]:
        if node["name"] in ("Y", "Z"):
            node.pop("qualitative")
            node["cpt"] = {"": [0.5, 0.5]}
    return network_from_dict(doc)


def test_example4_marginal_matches_grid(example4):
    net = uniform_example4(example4)
    q = Query.make("X", 0)
    prog = pose_marginal_query(net, q)
    lo = solve(prog.with_sense("min"))
    hi = solve(prog.with_sense("max"))
    grid = grid_bounds(net, q, GridSpec(step=0.05), kind="marginal")
    assert lo.bound <= grid.lo + 1e-9 and hi.bound >= grid.hi - 1e-9
    assert abs(lo.bound - grid.lo) <= 5e-3 and abs(hi.bound - grid.hi) <= 5e-3


def test_history_monotone_and_gap_consistent():
    rng = np.random.default_rng(11)
    for _ in range(5):
        net = random_sqpn(rng)
        prog = pose_influence_query(net, random_query(rng, net))
        res = solve(prog.with_sense("max"), SolverOptions(max_nodes=300))
        bounds = [b for _, b, _ in res.history]
        incs = [i for _, _, i in res.history if i is not None]
        assert all(b2 <= b1 + 1e-12 for b1, b2 in zip(bounds, bounds[1:]))
        assert all(i2 >= i1 - 1e-12 for i1, i2 in zip(incs, incs[1:]))
        if res.incumbent is not None:
            assert res.incumbent <= res.bound + 1e-9
            assert res.gap == pytest.approx(res.bound - res.incumbent, abs=1e-12)


def test_determinism():
    rng = np.random.default_rng(5)
    net = random_sqpn(rng)
    q = random_query(rng, net)
    runs = [solve(pose_influence_query(net, q), SolverOptions(max_nodes=200)) for _ in range(2)]
    assert runs[0].bound == runs[1].bound
    assert runs[0].incumbent == runs[1].incumbent
    assert runs[0].nodes == runs[1].nodes
    assert runs[0].history == runs[1].history


def test_threads_do_not_change_results():
    rng = np.random.default_rng(6)
    net = random_sqpn(rng)
    q = random_query(rng, net)
    prog = pose_influence_query(net, q)
    one = solve(prog, SolverOptions(max_nodes=100, threads=1))
    four = solve(prog, SolverOptions(max_nodes=100, threads=4))
    assert (one.bound, one.incumbent, one.nodes) == (four.bound, four.incumbent, four.nodes)


def test_progress_lines():
    lines = []
    rng = np.random.default_rng(2)
    net = random_sqpn(rng)
    prog = pose_influence_query(net, random_query(rng, net))
    solve(prog, SolverOptions(max_nodes=50, progress=lines.append, progress_every=1))
    assert lines and all(line.startswith("nodes=") and " bound=" in line and " gap=" in line
                         for line in lines)


# -- local refinement ---------------------------------------------------------

def example4_program(example4):
    return pose_marginal_query(uniform_example4(example4), Query.make("X", 0))


def test_refine_keeps_feasible_optimum(example4):
    prog = example4_program(example4).with_sense("max")
    best = solve(prog).point
    assert local_refine(prog, best) == best


def test_refine_renormalizes(example4):
    prog = example4_program(example4)
    start = solve(prog.with_sense("max")).point
    scaled = {v: (2.0 * x if v.role == "theta" else x) for v, x in start.items()}
    out = local_refine(prog, scaled)
    assert out is not None
    assert prog.constraints.max_violation(out) <= 1e-7


def test_refine_from_random_starts(example4):
    prog = example4_program(example4)
    rng = np.random.default_rng(0)
    ok = 0
    for _ in range(100):
        start = {v: float(rng.uniform(lo, hi)) for v, (lo, hi) in prog.constraints.boxes.items()}
        out = local_refine(prog, start)
        ok += out is not None and prog.constraints.max_violation(out) <= 1e-7
    assert ok >= 90


# -- properties ---------------------------------------------------------------

def _rejection_samples(net, rng, count, tries=20_000):
    cs = compile_network(net)
    samples = []
    for _ in range(tries):
        point, cpts = {}, {}
        for i, spec in enumerate(net.nodes):
            K = net.n_configs(spec.name)
            t = np.zeros((2, K))
            for k in range(K):
                lo, hi = cs.boxes[theta(i, 0, k)]
                u = lo if lo == hi else rng.uniform()
                t[:, k] = u, 1.0 - u
                point[theta(i, 0, k)], point[theta(i, 1, k)] = u, 1.0 - u
            cpts[spec.name] = t
        # u + (1 - u) can miss 1.0 by an ulp
        if cs.is_feasible(point, tol=1e-12):
            samples.append(cpts)
            if len(samples) == count:
                break
    return samples


def test_soundness_against_sampled_completions():
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(100):
        net = random_sqpn(rng)
        q = random_query(rng, net)
        prog = pose_influence_query(net, q)
        options = SolverOptions(max_nodes=40)
        lo = solve(prog.with_sense("min"), options).bound
        hi = solve(prog.with_sense("max"), options).bound
        assert len(q.evidence) == 1
        for cpts in _rejection_samples(net, rng, 100):
            pe = numeric_ve(net, q.evidence[0][0], q.evidence[0][1], cpts=cpts)
            if pe < 1e-6:
                continue
            value = (numeric_ve(net, q.target, q.value, q.evidence_map, cpts=cpts)
                     - numeric_ve(net, q.target, q.value, cpts=cpts))
            assert lo - 1e-7 <= value <= hi + 1e-7
            checked += 1
    assert checked > 1000


def test_root_relaxation_dominates_grid():
    rng = np.random.default_rng(99)
    for _ in range(10):
        net = random_sqpn(rng, max_free=4)
        q = random_query(rng, net)
        prog = pose_influence_query(net, q)
        grid = grid_bounds(net, q)
        lo = solve(prog.with_sense("min"), SolverOptions(max_nodes=1))
        hi = solve(prog.with_sense("max"), SolverOptions(max_nodes=1))
        assert lo.root_bound <= grid.lo + 1e-7
        assert hi.root_bound >= grid.hi - 1e-7
