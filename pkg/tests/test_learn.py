import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sqpn.constraints import compile_network, theta
from sqpn.data import Dataset, fixture_path, load_dataset
from sqpn.learn import (
    Counts,
    IdmConfig,
    LearningError,
    MLOptions,
    ZeroCountWarning,
    count_statistics,
    fit_idm,
    fit_ml,
    posterior_mean,
)
from sqpn.model import NodeSpec, QualitativeRelation, make_network, validate_network
from sqpn.oracle import GridSpec, grid_ml

from conftest import B, EXAMPLE4_X


# -- posterior mean -----------------------------------------------------------

def test_posterior_mean_example5_root():
    assert posterior_mean(2.0, (2 / 3, 1 / 3), (29, 11)) == pytest.approx((0.7222, 0.2778),
                                                                        abs=5e-5)


def test_posterior_mean_without_prior_weight_is_frequency():
    assert posterior_mean(0.0, (0.5, 0.5), (29, 11)) == pytest.approx((0.725, 0.275), abs=1e-15)


def test_posterior_mean_without_data_is_prior():
    assert posterior_mean(2.0, (0.4, 0.6), (0, 0)) == pytest.approx((0.4, 0.6), abs=1e-15)


@pytest.mark.parametrize("args", [
    (0.0, (0.5, 0.5), (0, 0)),
    (-1.0, (0.5, 0.5), (1, 1)),
    (2.0, (0.5, 0.6), (1, 1)),
    (2.0, (0.5, 0.5), (1, -1)),
    (2.0, (0.5, 0.5), (1, 1, 1)),
])
def test_posterior_mean_rejects_bad_input(args):
    with pytest.raises(LearningError):
        posterior_mean(*args)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 100), st.lists(st.integers(0, 1000), min_size=2, max_size=5),
       st.integers(0, 2 ** 31))
def test_posterior_mean_is_simplex_point(s, counts, seed):
    tau = np.random.default_rng(seed).dirichlet(np.ones(len(counts)))
    out = posterior_mean(s, tau, counts)
    assert abs(out.sum() - 1.0) <= 1e-12
    assert np.all(out >= 0)


# -- counts -------------------------------------------------------------------

def test_example4_dataset_counts(example4):
    data = load_dataset(fixture_path("example4.csv").read_text(), example4)
    counts = count_statistics(data, example4)
    assert counts.n == 40
    assert np.array_equal(counts.table("X"), EXAMPLE4_X)


def test_empty_dataset_counts_zero(example4):
    counts = count_statistics(Dataset(("Y", "Z", "X"), np.zeros((0, 3), dtype=int)), example4)
    assert counts.n == 0
    assert all(not t.any() for t in counts.tables.values())


def test_duplicated_record_doubles_count(example4):
    one = Dataset(("Y", "Z", "X"), np.array([[0, 1, 0]]))
    two = Dataset(("Y", "Z", "X"), np.array([[0, 1, 0], [0, 1, 0]]))
    c1, c2 = count_statistics(one, example4), count_statistics(two, example4)
    for name in ("Y", "Z", "X"):
        assert np.array_equal(2 * c1.table(name), c2.table(name))


# -- constrained maximum likelihood -------------------------------------------

def pair(sign="+", counts=((3, 5), (7, 5))):
    net = make_network([("A", B), ("X", B)],
                       [NodeSpec("A", qualitative=True),
                        NodeSpec("X", ("A",), relations=(QualitativeRelation.influence("A", sign),))])
    cols = np.asarray(counts).sum(axis=0)
    return net, Counts.from_tables(net, {"A": [[cols[0]], [cols[1]]], "X": counts})


def test_unconstrained_fit_is_frequency():
    net = make_network([("A", B), ("X", B)],
                       [NodeSpec("A", qualitative=True), NodeSpec("X", ("A",), qualitative=True)])
    N = np.array([[3, 8], [9, 2]])
    fit = fit_ml(net, Counts.from_tables(net, {"A": [[12], [10]], "X": N}))
    assert np.array_equal(fit.estimates["X"], N / N.sum(axis=0))
    assert np.array_equal(fit.estimates["A"], np.array([[12 / 22], [10 / 22]]))


def test_violated_order_is_pooled():
    # frequencies 0.3 and 0.5 against theta(x|a) >= theta(x|abar)
    net, counts = pair()
    est = fit_ml(net, counts).estimates["X"][0]
    assert est == pytest.approx([0.4, 0.4], abs=1e-6)
    oracle = grid_ml(net, counts).estimates["X"][0]
    assert est == pytest.approx(oracle, abs=1e-3)


def test_satisfied_order_keeps_frequencies():
    net, counts = pair(sign="-")
    assert fit_ml(net, counts).estimates["X"][0] == pytest.approx([0.3, 0.5], abs=1e-6)


def test_zero_influence_pools_exactly():
    net, counts = pair(sign="0", counts=((2, 9), (8, 11)))
    est = fit_ml(net, counts).estimates["X"][0]
    assert est == pytest.approx([11 / 30, 11 / 30], abs=1e-6)


def test_example4_fit_matches_oracle(example4, example4_counts):
    fit = fit_ml(example4, example4_counts)
    oracle = grid_ml(example4, example4_counts, GridSpec(step=0.005))
    assert fit.violation <= 1e-6
    assert fit.loglik >= oracle.loglik - 1e-3
    assert fit.estimates["X"][0] == pytest.approx(oracle.estimates["X"][0], abs=0.01)


def test_learned_network_is_numeric_and_valid(example4, example4_counts):
    learned = fit_ml(example4, example4_counts).network
    assert validate_network(learned).ok
    cs = compile_network(learned)
    assert all(lo == hi for lo, hi in cs.boxes.values())


def test_zero_count_row_left_free():
    net, _ = pair()
    counts = Counts.from_tables(net, {"A": [[10], [0]], "X": [[3, 0], [7, 0]]})
    with pytest.warns(ZeroCountWarning):
        fit = fit_ml(net, counts)
    assert fit.free_rows == {"X": (1,)}
    spec = fit.network.node("X")
    assert 1 not in spec.numeric_rows
    assert spec.interval_rows[(0, 1)] == (0.0, 1.0)


def _sample_counts(net, cpt_x, pa, pb, n, rng):
    y = rng.uniform(size=n) >= pa
    z = rng.uniform(size=n) >= pb
    k = 2 * y + z
    x = rng.uniform(size=n) >= cpt_x[k]
    X = np.zeros((2, 4))
    np.add.at(X, (x.astype(int), k), 1)
    return Counts.from_tables(net, {"Y": [[(~y).sum()], [y.sum()]],
                                    "Z": [[(~z).sum()], [z.sum()]], "X": X})


def test_estimates_converge_to_generating_cpt(example4):
    truth = np.array([0.6, 0.3, 0.8, 0.5])
    cs = compile_network(example4)
    point = {theta(2, 0, k): t for k, t in enumerate(truth)}
    point.update({theta(2, 1, k): 1 - t for k, t in enumerate(truth)})
    point.update({v: 0.5 for v in cs.boxes if v.i < 2})
    assert cs.is_feasible(point, tol=0.0)
    rng = np.random.default_rng(17)
    errors = []
    for n in (100, 1_000, 10_000):
        counts = _sample_counts(example4, truth, 0.5, 0.5, n, rng)
        est = fit_ml(example4, counts, MLOptions(multistart=8)).estimates["X"][0]
        errors.append(np.abs(est - truth).max())
    assert errors[0] > errors[1] > errors[2]


# -- constrained IDM ----------------------------------------------------------

def test_idm_root_estimates(example5, example5_counts):
    credal = fit_idm(example5, example5_counts)
    assert credal.point_estimates[("Y", 0)][0] == pytest.approx((2 * (2 / 3) + 29) / 42,
                                                                abs=1e-12)
    assert credal.point_estimates[("Z", 0)][0] == pytest.approx((2 * 0.25 + 25) / 42, abs=1e-12)


def test_idm_expressions(example5, example5_counts):
    credal = fit_idm(example5, example5_counts)
    for k, (count, total) in enumerate([(3, 6), (6, 20), (8, 10), (1, 4)]):
        e = credal.expressions[("X", 0, k)]
        assert e.s == 2.0 and e.count == count and e.s + e.total == 2 + total


def test_idm_width_formula(example5, example5_counts):
    credal = fit_idm(example5, example5_counts, IdmConfig(s_p=3.0))
    for e in credal.expressions.values():
        assert e.width == pytest.approx(3.0 / (3.0 + e.total), abs=1e-15)
        assert e.evaluate(1.0) - e.evaluate(0.0) == pytest.approx(e.width, abs=1e-15)


def test_idm_width_shrinks_with_data(example5):
    widths = []
    for scale in (1, 10, 100):
        counts = Counts.from_tables(example5, {"Y": [[29 * scale], [11 * scale]],
                                               "Z": [[25 * scale], [15 * scale]],
                                               "X": EXAMPLE4_X * scale})
        widths.append(max(e.width for e in fit_idm(example5, counts).expressions.values()))
    assert widths[0] > widths[1] > widths[2]


def test_idm_rejects_nonpositive_dispersion():
    with pytest.raises(LearningError):
        IdmConfig(s_p=0.0)


def test_idm_constraints_over_hyperparameters(example5, example5_counts):
    cons = fit_idm(example5, example5_counts).t_constraints()
    assert len(cons) == 5
    assert all(v.role == "hyper_t" for c in cons for v in c.variables)


def test_substituted_hyperparameters_give_cpts(example5, example5_counts):
    credal = fit_idm(example5, example5_counts)
    rng = np.random.default_rng(3)
    for _ in range(20):
        t = {}
        for k in range(4):
            u = rng.uniform()
            t[("X", 0, k)], t[("X", 1, k)] = u, 1 - u
        net = credal.substitute(t)
        assert validate_network(net).ok
        for k in range(4):
            assert sum(net.node("X").numeric_rows[k]) == pytest.approx(1.0, abs=1e-12)
