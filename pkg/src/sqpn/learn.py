"""Parameter learning from complete data.

Two estimators are provided.  ``fit_ml`` maximizes the log-likelihood of
each constrained family separately under its compiled relation constraints.
``fit_idm`` reads the network as a prior: numeric rows are Dirichlet prior
means, qualitative rows become a set of Dirichlet priors whose location
hyperparameters ``t`` obey the relations, and the posterior means are affine
in ``t``.  The result of the latter is a credal network that the inference
pipeline accepts directly.
"""

from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .constraints import (
    ConstraintSet,
    IndexedConstraints,
    MultilinearConstraint,
    ParamVar,
    compile_interval_assessments,
    compile_relations,
    hyper,
    relation_constraints,
    theta,
)
from .model import IdmRows, Network, NetworkError, NodeSpec, validate_network


class LearningError(NetworkError):
    pass


class ZeroCountWarning(UserWarning):
    """A parent configuration never occurs in the data."""


# ---------------------------------------------------------------------------
# Counts
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Counts:
    """``N_ijk`` per node as a ``(card, n_configs)`` array, plus the record total."""

    tables: dict[str, np.ndarray]
    n: int

    def table(self, name: str) -> np.ndarray:
        return self.tables[name]

    @classmethod
    def from_tables(cls, net: Network, tables: Mapping[str, Sequence], n: int | None = None
                    ) -> Counts:
        """Validate shapes and the per-family totals."""
        out = {}
        for spec in net.nodes:
            name = spec.name
            if name not in tables:
                raise LearningError(f"no counts for node {name!r}")
            t = np.asarray(tables[name], dtype=float)
            shape = (net.card(name), net.n_configs(name))
            if t.ndim == 1 and shape[1] == 1:
                t = t[:, None]
            if t.shape != shape:
                raise LearningError(f"counts for {name!r} have shape {t.shape}, expected {shape}")
            if np.any(t < 0) or np.any(t != np.round(t)):
                raise LearningError(f"counts for {name!r} must be nonnegative integers")
            out[name] = t
        extra = set(tables) - set(out)
        if extra:
            raise LearningError(f"counts for unknown nodes: {sorted(extra)}")
        totals = {name: int(t.sum()) for name, t in out.items()}
        if n is None:
            n = next(iter(totals.values()), 0)
        bad = {k: v for k, v in totals.items() if v != n}
        if bad:
            raise LearningError(f"family totals differ from N={n}: {bad}")
        return cls(out, int(n))


def count_statistics(dataset, net: Network) -> Counts:
    """Exact ``N_ijk`` from complete records.

    ``dataset`` needs ``columns`` (variable names) and ``records`` (an
    integer array of value indices, one row per record).
    """
    columns = list(dataset.columns)
    if sorted(columns) != sorted(net.names):
        raise LearningError(f"dataset columns {columns} do not match the network variables")
    rec = np.asarray(dataset.records, dtype=int).reshape(-1, len(columns))
    if np.any(rec < 0):
        raise LearningError("missing data unsupported")
    col = {name: n for n, name in enumerate(columns)}
    tables = {}
    for spec in net.nodes:
        name = spec.name
        t = np.zeros((net.card(name), net.n_configs(name)))
        k = np.zeros(len(rec), dtype=int)
        for p in spec.parents:
            k = k * net.card(p) + rec[:, col[p]]
        np.add.at(t, (rec[:, col[name]], k), 1.0)
        tables[name] = t
    return Counts(tables, len(rec))


def _row_label(net: Network, spec: NodeSpec, j: int, k: int) -> str:
    value = net.var(spec.name).values[j]
    if not spec.parents:
        return value
    cfg = next(itertools.islice(
        itertools.product(*(range(net.card(p)) for p in spec.parents)), k, None))
    ctx = ",".join(net.var(p).values[v] for p, v in zip(spec.parents, cfg))
    return f"{value}|{ctx}"


def _zero_rows(spec: NodeSpec, N: np.ndarray) -> list[int]:
    return [k for k in range(N.shape[1])
            if k not in spec.numeric_rows and N[:, k].sum() == 0]


def _loglik(N: np.ndarray, est: np.ndarray) -> float:
    mask = N > 0
    with np.errstate(divide="ignore"):
        return float(np.sum(N[mask] * np.log(est[mask])))


# ---------------------------------------------------------------------------
# Constrained maximum likelihood
# ---------------------------------------------------------------------------

@dataclass
class MLOptions:
    multistart: int = 32
    seed: int = 0
    maxiter: int = 500
    feas_tol: float = 1e-9

    def __post_init__(self):
        if self.multistart < 1:
            raise ValueError("multistart must be at least 1")


@dataclass
class MLFit:
    network: Network
    estimates: dict[str, np.ndarray]
    loglik: float
    per_node: dict[str, float]
    violation: float
    free_rows: dict[str, tuple[int, ...]] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)


def fit_ml(net: Network, counts: Counts, options: MLOptions | None = None) -> MLFit:
    """Per-node constrained maximum likelihood.

    Numeric rows are kept as stated.  Nodes without relations get relative
    frequencies; a node with relations is fitted by multistart SLSQP over
    its free rows.  Rows whose parent configuration never occurs stay free
    (an interval ``[0, 1]`` under the node's relations) and raise a
    ``ZeroCountWarning``.
    """
    options = options or MLOptions()
    cs = compile_relations(net)
    cs.extend(compile_interval_assessments(net))
    estimates, per_node, notes, free_rows = {}, {}, [], {}
    worst = 0.0
    specs = []
    for spec in net.nodes:
        name, i = spec.name, net.index(spec.name)
        N = counts.table(name)
        card, K = N.shape
        zero = _zero_rows(spec, N)
        for k in zero:
            msg = f"node {name!r}: parent configuration {k} has no records; row left free"
            warnings.warn(msg, ZeroCountWarning, stacklevel=2)
            notes.append(msg)
        est = np.zeros((card, K))
        for k in range(K):
            if k in spec.numeric_rows:
                est[:, k] = spec.numeric_rows[k]
            elif k not in zero:
                est[:, k] = N[:, k] / N[:, k].sum()
            else:
                est[:, k] = 1.0 / card
        if spec.relations or any(k2 not in spec.numeric_rows for (_, k2) in spec.interval_rows):
            est, viol = _fit_node(net, spec, i, N, cs, options)
            worst = max(worst, viol)
        estimates[name] = est
        per_node[name] = _loglik(N, est)
        if zero:
            free_rows[name] = tuple(zero)
        specs.append(_learned_spec(spec, est, zero))
    learned = Network(net.variables, tuple(specs), net.logic_assessments)
    return MLFit(learned, estimates, float(sum(per_node.values())), per_node, worst,
                 free_rows, notes)


def _learned_spec(spec: NodeSpec, est: np.ndarray, zero: list[int]) -> NodeSpec:
    rows = {k: tuple(float(x) for x in est[:, k]) for k in range(est.shape[1]) if k not in zero}
    if not zero:
        return NodeSpec(spec.name, spec.parents, numeric_rows=rows)
    intervals = {(j, k): (0.0, 1.0) for k in zero for j in range(est.shape[0])}
    intervals.update({jk: iv for jk, iv in spec.interval_rows.items() if jk[1] in zero})
    return NodeSpec(spec.name, spec.parents, numeric_rows=rows, relations=spec.relations,
                    interval_rows=intervals)


def _fit_node(net: Network, spec: NodeSpec, i: int, N: np.ndarray, cs: ConstraintSet,
              options: MLOptions) -> tuple[np.ndarray, float]:
    card, K = N.shape
    free_k = [k for k in range(K) if k not in spec.numeric_rows]
    order = [theta(i, j, k) for k in free_k for j in range(card)]
    pos = {v: n for n, v in enumerate(order)}
    mine = [c for c in cs.constraints if c.variables and all(v in pos for v in c.variables)]
    ic = IndexedConstraints(mine, order)
    sgn = ic.signed()
    counts = np.array([N[v.j, v.k] for v in order])
    mask = counts > 0
    lo = np.array([cs.boxes[v][0] for v in order])
    hi = np.array([cs.boxes[v][1] for v in order])
    lo_opt = np.where(mask, np.maximum(lo, 1e-12), lo)

    def f(x):
        return -float(np.sum(counts[mask] * np.log(np.maximum(x[mask], 1e-300))))

    def g(x):
        out = np.zeros_like(x)
        out[mask] = -counts[mask] / np.maximum(x[mask], 1e-300)
        return out

    eq = np.flatnonzero(sgn == 0)
    ineq = np.flatnonzero(sgn != 0)
    cons = []
    if len(eq):
        cons.append({"type": "eq", "fun": lambda x: (ic.lhs(x) - ic.rhs)[eq],
                     "jac": lambda x: ic.jacobian(x)[eq]})
    if len(ineq):
        cons.append({"type": "ineq", "fun": lambda x: sgn[ineq] * (ic.lhs(x) - ic.rhs)[ineq],
                     "jac": lambda x: sgn[ineq, None] * ic.jacobian(x)[ineq]})

    def violation(x):
        d = ic.lhs(x) - ic.rhs
        v = np.where(sgn == 0, np.abs(d), np.maximum(-sgn * d, 0.0))
        return max(float(np.max(v, initial=0.0)), float(np.max(lo - x, initial=0.0)),
                   float(np.max(x - hi, initial=0.0)))

    rng = np.random.default_rng(options.seed + i)
    starts = []
    freq = np.concatenate([N[:, k] / N[:, k].sum() if N[:, k].sum() > 0 else
                           np.full(card, 1.0 / card) for k in free_k])
    starts.append(freq)
    for _ in range(options.multistart - 1):
        starts.append(np.concatenate([rng.dirichlet(np.ones(card)) for _ in free_k]))
    best, best_val, best_viol = None, np.inf, np.inf
    for x0 in starts:
        x0 = np.clip(x0, lo_opt, hi)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            res = minimize(f, x0, jac=g, method="SLSQP", bounds=list(zip(lo_opt, hi)),
                           constraints=cons,
                           options={"maxiter": options.maxiter, "ftol": 1e-13})
        x = np.clip(res.x, lo, hi)
        v = violation(x)
        if v > 1e-6:
            continue
        val = f(x)
        # prefer strictly feasible points, then likelihood
        if (v <= options.feas_tol and (best_viol > options.feas_tol or val < best_val)) or \
                (best_viol > options.feas_tol and v < best_viol):
            best, best_val, best_viol = x, val, v
    if best is None:
        raise LearningError(f"node {spec.name!r}: no estimate satisfies the relations")
    est = np.zeros((card, K))
    for k in range(K):
        if k in spec.numeric_rows:
            est[:, k] = spec.numeric_rows[k]
    for v, x in zip(order, best):
        est[v.j, v.k] = x
    return est, best_viol


# ---------------------------------------------------------------------------
# Constrained imprecise Dirichlet model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class IdmConfig:
    s_p: float = 2.0

    def __post_init__(self):
        if not self.s_p > 0:
            raise LearningError(f"s_p must be positive, got {self.s_p}")


def posterior_mean(s: float, tau: Sequence[float], counts: Sequence[float]) -> np.ndarray:
    """``(s * tau + N) / (s + sum N)`` componentwise."""
    tau = np.asarray(tau, dtype=float)
    counts = np.asarray(counts, dtype=float)
    if s < 0:
        raise LearningError("dispersion s must be nonnegative")
    if tau.shape != counts.shape:
        raise LearningError("prior mean and counts differ in length")
    if np.any(counts < 0):
        raise LearningError("counts must be nonnegative")
    if np.any(tau < 0) or abs(tau.sum() - 1.0) > 1e-9:
        raise LearningError("prior mean must be a probability vector")
    total = s + counts.sum()
    if total == 0:
        raise LearningError("posterior mean undefined for s = 0 and no data")
    return (s * tau + counts) / total


def _num(x: float) -> str:
    return f"{x:.12g}"


@dataclass(frozen=True)
class ThetaExpression:
    """``theta = (s * t + count) / (s + total)`` for one IDM entry."""

    node: str
    j: int
    k: int
    label: str
    s: float
    count: float
    total: float

    @property
    def slope(self) -> float:
        return self.s / (self.s + self.total)

    @property
    def intercept(self) -> float:
        return self.count / (self.s + self.total)

    @property
    def width(self) -> float:
        """Range of the estimate as ``t`` sweeps ``[0, 1]``."""
        return self.slope

    def evaluate(self, t: float) -> float:
        return (self.s * t + self.count) / (self.s + self.total)

    def __str__(self) -> str:
        return f"({_num(self.s)}t[{self.label}] + {_num(self.count)})/{_num(self.s + self.total)}"


@dataclass
class CredalNetwork:
    """Learned network whose IDM rows are affine in the hyperparameters ``t``."""

    base: Network
    network: Network
    s_p: float
    expressions: dict[tuple[str, int, int], ThetaExpression]
    point_estimates: dict[tuple[str, int], tuple[float, ...]]

    def t_constraints(self) -> list[MultilinearConstraint]:
        """The relations of the prior network, restated over ``t``."""
        out = []
        for spec in self.network.nodes:
            if spec.idm is None:
                continue
            for rel in spec.relations:
                out.extend(relation_constraints(self.network, spec, rel).constraints)
        return out

    def t_variable(self, node: str, j: int, k: int) -> ParamVar:
        return hyper(self.network.index(node), j, k)

    def substitute(self, t: Mapping[tuple[str, int, int], float]) -> Network:
        """Fully numeric network for one choice of every ``t``."""
        specs = []
        for spec in self.network.nodes:
            if spec.idm is None:
                specs.append(spec)
                continue
            rows = dict(spec.numeric_rows)
            for k in spec.idm.counts:
                card = self.network.card(spec.name)
                rows[k] = tuple(self.expressions[(spec.name, j, k)].evaluate(t[(spec.name, j, k)])
                                for j in range(card))
            specs.append(NodeSpec(spec.name, spec.parents, numeric_rows=rows))
        return Network(self.network.variables, tuple(specs))

    def describe(self) -> list[str]:
        lines = []
        for (name, j, k), e in sorted(self.expressions.items(),
                                      key=lambda kv: (self.network.index(kv[0][0]),) + kv[0][1:]):
            lines.append(f"theta[{e.label}] = {e}")
        return lines


def fit_idm(net: Network, counts: Counts, config: IdmConfig | None = None) -> CredalNetwork:
    """Posterior means under the constrained IDM prior.

    Numeric rows act as prior means and receive point estimates.  Every
    other row gets hyperparameters ``t`` on the simplex, restricted by the
    node's relations and intervals, and an estimate affine in ``t``.
    """
    config = config or IdmConfig()
    s = float(config.s_p)
    report = validate_network(net)
    if not report.ok:
        raise LearningError("; ".join(report.violations))
    specs, exprs, points = [], {}, {}
    for spec in net.nodes:
        name = spec.name
        N = counts.table(name)
        card, K = N.shape
        numeric, idm_counts = {}, {}
        for k in range(K):
            if k in spec.numeric_rows:
                numeric[k] = tuple(float(x) for x in
                                   posterior_mean(s, spec.numeric_rows[k], N[:, k]))
                points[(name, k)] = numeric[k]
            else:
                idm_counts[k] = tuple(float(x) for x in N[:, k])
                total = float(N[:, k].sum())
                for j in range(card):
                    exprs[(name, j, k)] = ThetaExpression(
                        name, j, k, _row_label(net, spec, j, k), s, float(N[j, k]), total)
        if not idm_counts:
            specs.append(NodeSpec(name, spec.parents, numeric_rows=numeric))
            continue
        tau = {k: tuple(spec.numeric_rows[k]) for k in numeric}
        specs.append(replace(spec, numeric_rows=numeric, tau=tau,
                             idm=IdmRows(s, idm_counts)))
    learned = Network(net.variables, tuple(specs), net.logic_assessments)
    report = validate_network(learned)
    if not report.ok:
        raise LearningError("; ".join(report.violations))
    return CredalNetwork(net, learned, s, exprs, points)
