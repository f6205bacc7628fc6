"""Brute-force ground truth for small instances.

Nothing here uses the constraint compiler or the solver: probabilities come
from explicit joint enumeration, qualitative relations are evaluated
directly on CPT arrays, and extremes are found by enumerating a parameter
grid.  Each free row of a binary node contributes one coordinate (its first
entry); rows with more values contribute all but their last entry.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .model import (
    BooleanFormula,
    EvidenceImpossible,
    Network,
    NetworkError,
    Query,
    RelationKind,
    formula_variables,
)

FEAS_TOL = 1e-9
MIN_EVIDENCE = 1e-6


@dataclass(frozen=True)
class GridSpec:
    """Grid resolution.  ``step=None`` picks the finest step whose full grid
    stays within ``budget`` points (never finer than ``min_step``)."""

    step: float | None = None
    refine: int = 2
    budget: int = 300_000
    min_step: float = 0.005
    chunk: int = 4096

    def __post_init__(self):
        if self.step is not None and not 0 < self.step <= 0.5:
            raise ValueError("grid step must lie in (0, 0.5]")

    def resolve(self, dims: int) -> float:
        if self.step is not None:
            return self.step
        if dims == 0:
            return self.min_step
        per_axis = int(math.floor(self.budget ** (1.0 / dims) + 1e-9))
        return max(self.min_step, 1.0 / max(per_axis - 1, 2))


@dataclass
class GridResult:
    lo: float
    hi: float
    step: float
    n_points: int
    n_feasible: int
    argmin: dict[tuple[str, int, int], float] = field(default_factory=dict)
    argmax: dict[tuple[str, int, int], float] = field(default_factory=dict)


@dataclass
class GridML:
    estimates: dict[str, np.ndarray]
    loglik: float
    per_node: dict[str, float]
    step: float


# ---------------------------------------------------------------------------
# Joint enumeration
# ---------------------------------------------------------------------------

class _Joint:
    """All joint configurations of a variable subset closed under parents."""

    def __init__(self, net: Network, names: Sequence[str]):
        self.net = net
        self.names = [n for n in net.topological_order if n in set(names)]
        self.pos = {n: i for i, n in enumerate(self.names)}
        cards = [net.card(n) for n in self.names]
        self.configs = np.array(list(itertools.product(*(range(c) for c in cards))),
                                dtype=np.int64).reshape(-1, len(self.names))
        self.row_index = {}
        for n in self.names:
            k = np.zeros(len(self.configs), dtype=np.int64)
            for p in net.node(n).parents:
                k = k * net.card(p) + self.configs[:, self.pos[p]]
            self.row_index[n] = k

    def probabilities(self, cpts: Mapping[str, np.ndarray]) -> np.ndarray:
        """Joint probabilities, shape ``(G, C)``; CPTs have shape ``(G, card, K)``."""
        out = None
        for n in self.names:
            t = cpts[n]
            vals = t[:, self.configs[:, self.pos[n]], self.row_index[n]]
            out = vals if out is None else out * vals
        return out

    def mask(self, assignment: Mapping[str, int]) -> np.ndarray:
        m = np.ones(len(self.configs), dtype=bool)
        for n, v in assignment.items():
            m &= self.configs[:, self.pos[n]] == v
        return m


def _numeric_cpts(net: Network, names) -> dict[str, np.ndarray]:
    out = {}
    for n in names:
        spec = net.node(n)
        K = net.n_configs(n)
        table = np.zeros((1, net.card(n), K))
        for k in range(K):
            if k not in spec.numeric_rows:
                raise NetworkError(f"node {n!r} row {k} is not numeric")
            table[0, :, k] = spec.numeric_rows[k]
        out[n] = table
    return out


def numeric_ve(net: Network, target: str, value: int = 0,
               evidence: Mapping[str, int] | None = None,
               cpts: Mapping[str, np.ndarray] | None = None) -> float:
    """``P(target=value | evidence)`` by summing the joint.

    ``cpts`` optionally overrides node tables (arrays of shape ``(card, K)``).
    """
    evidence = dict(evidence or {})
    names = net.ancestors([target] + list(evidence))
    tables = {}
    for n in names:
        if cpts is not None and n in cpts:
            tables[n] = np.asarray(cpts[n], dtype=float)[None]
        else:
            tables[n] = _numeric_cpts(net, [n])[n]
    joint = _Joint(net, names)
    p = joint.probabilities(tables)[0]
    pe = p[joint.mask(evidence)].sum()
    if pe <= 0.0:
        raise EvidenceImpossible("P(evidence) = 0")
    return float(p[joint.mask({**evidence, target: value})].sum() / pe)


# ---------------------------------------------------------------------------
# Parametrization of free rows
# ---------------------------------------------------------------------------

@dataclass
class _Row:
    node: str
    k: int
    card: int
    lo: np.ndarray
    hi: np.ndarray
    idm: tuple[float, tuple[float, ...]] | None  # (s, counts) when t-parametrized
    coords: list[int]


class _Params:
    """Maps a coordinate matrix ``X`` of shape ``(G, D)`` to CPT arrays and
    to relation atoms (θ, or t for IDM rows)."""

    def __init__(self, net: Network, names: Sequence[str]):
        self.net = net
        self.names = list(names)
        self.rows: list[_Row] = []
        self.coord_info: list[tuple[str, int, int]] = []
        self.coord_range: list[tuple[float, float]] = []
        for n in self.names:
            spec = net.node(n)
            card = net.card(n)
            for k in range(net.n_configs(n)):
                idm = None
                if spec.idm is not None and k in spec.idm.counts:
                    idm = (spec.idm.s, tuple(spec.idm.counts[k]))
                elif k in spec.numeric_rows:
                    continue
                lo = np.array([spec.interval_rows.get((j, k), (0.0, 1.0))[0] for j in range(card)])
                hi = np.array([spec.interval_rows.get((j, k), (0.0, 1.0))[1] for j in range(card)])
                coords = []
                for j in range(card - 1):
                    c_lo, c_hi = lo[j], hi[j]
                    if card == 2:
                        c_lo, c_hi = max(c_lo, 1.0 - hi[1]), min(c_hi, 1.0 - lo[1])
                    coords.append(len(self.coord_info))
                    self.coord_info.append((n, k, j))
                    self.coord_range.append((c_lo, c_hi))
                self.rows.append(_Row(n, k, card, lo, hi, idm, coords))
        self.D = len(self.coord_info)

    def _row_values(self, row: _Row, X: np.ndarray) -> np.ndarray:
        head = X[:, row.coords]
        last = 1.0 - head.sum(axis=1, keepdims=True)
        return np.concatenate([head, last], axis=1)

    def valid(self, X: np.ndarray) -> np.ndarray:
        ok = np.ones(len(X), dtype=bool)
        for c, (lo, hi) in enumerate(self.coord_range):
            ok &= (X[:, c] >= lo - FEAS_TOL) & (X[:, c] <= hi + FEAS_TOL)
        for row in self.rows:
            vals = self._row_values(row, X)
            ok &= np.all(vals >= row.lo - FEAS_TOL, axis=1) & np.all(vals <= row.hi + FEAS_TOL, axis=1)
        return ok

    def tables(self, X: np.ndarray, atoms: bool = False) -> dict[str, np.ndarray]:
        """CPT arrays (``atoms=False``) or relation-atom arrays (``atoms=True``)."""
        G = len(X)
        out = {}
        for n in self.names:
            spec = self.net.node(n)
            K = self.net.n_configs(n)
            t = np.zeros((G, self.net.card(n), K))
            for k, row in spec.numeric_rows.items():
                if atoms and spec.idm is not None and k in spec.tau:
                    t[:, :, k] = spec.tau[k]
                else:
                    t[:, :, k] = row
            if atoms and spec.idm is not None:
                for k, row in spec.tau.items():
                    if k not in spec.idm.counts:
                        t[:, :, k] = row
            out[n] = t
        for row in self.rows:
            vals = self._row_values(row, X)
            if row.idm is not None and not atoms:
                s, counts = row.idm
                counts = np.asarray(counts, dtype=float)
                vals = (s * vals + counts) / (s + counts.sum())
            out[row.node][:, :, row.k] = vals
        return out


def _contexts(net: Network, owner: str, fixed: Sequence[str]):
    others = [p for p in net.node(owner).parents if p not in fixed]
    for vals in itertools.product(*(range(net.card(p)) for p in others)):
        yield dict(zip(others, vals))


def _row(net: Network, owner: str, assign: Mapping[str, int]) -> int:
    k = 0
    for p in net.node(owner).parents:
        k = k * net.card(p) + assign[p]
    return k


def relation_residuals(net: Network, owner: str, rel, A: Mapping[str, np.ndarray]):
    """Residual arrays of one relation on atom tables ``A`` (shape ``(G, card, K)``).

    Returns ``(kind, residual)`` pairs: ``"ge"`` holds when the residual is
    nonnegative and ``"eq"`` when it is zero.  Qualitative relations read
    value 0 as the higher value.
    """
    if rel.sign == "?":
        return []
    t = A[owner]
    out = []

    def signed(diff, lower=0.0):
        if rel.sign == "+":
            out.append(("ge", diff - lower))
        elif rel.sign == "-":
            out.append(("ge", -diff - lower))
        else:
            out.append(("eq", diff))

    if rel.kind in (RelationKind.INFLUENCE, RelationKind.SITUATIONAL,
                    RelationKind.WEAK, RelationKind.STRONG):
        src = rel.sources[0]
        ctxs = [dict(rel.context)] if rel.kind is RelationKind.SITUATIONAL \
            else list(_contexts(net, owner, [src]))
        for ctx in ctxs:
            diff = t[:, 0, _row(net, owner, {**ctx, src: 0})] - t[:, 0, _row(net, owner, {**ctx, src: 1})]
            if rel.kind is RelationKind.STRONG:
                signed(diff, rel.delta)
            else:
                signed(diff)
                if rel.kind is RelationKind.WEAK:
                    out.append(("ge", rel.delta - (diff if rel.sign == "+" else -diff)))
    else:
        a, b = rel.sources
        c = rel.target if rel.kind is RelationKind.PRODUCT_SYNERGY else 0
        for ctx in _contexts(net, owner, [a, b]):
            def g(va, vb):
                return t[:, c, _row(net, owner, {**ctx, a: va, b: vb})]
            if rel.kind is RelationKind.ADDITIVE_SYNERGY:
                signed(g(0, 0) + g(1, 1) - g(1, 0) - g(0, 1))
            else:
                signed(g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0))
    return out


class _Feasible:
    """Equality elimination plus inequality filtering over a coordinate grid."""

    def __init__(self, net: Network, params: _Params):
        self.net = net
        self.params = params
        self.items = []  # (owner, relation, residual index)
        for n in params.names:
            for rel in net.node(n).relations:
                self.items.append((n, rel))
        probe = np.full((1, params.D), 0.5)
        self.eqs = []
        for n, rel in self.items:
            res = relation_residuals(net, n, rel, params.tables(probe, atoms=True))
            for r, (kind, _) in enumerate(res):
                if kind == "eq":
                    self.eqs.append((n, rel, r))
        # greedy, dependency-safe choice of the coordinate each equality determines
        self.eliminated: list[tuple[int, tuple]] = []
        self.unsolved: list[tuple] = []
        used_before: set[int] = set()
        taken: set[int] = set()
        for eq in self.eqs:
            deps = self._dependencies(eq)
            choice = next((c for c in sorted(deps) if c not in used_before and c not in taken), None)
            if choice is None:
                self.unsolved.append(eq)
            else:
                self.eliminated.append((choice, eq))
                taken.add(choice)
            used_before |= deps
        self.base = [c for c in range(params.D) if c not in taken]

    def _residual(self, eq, X):
        n, rel, r = eq
        return relation_residuals(self.net, n, rel, self.params.tables(X, atoms=True))[r][1]

    def _dependencies(self, eq) -> set[int]:
        X0 = np.full((1, self.params.D), 0.37)
        base = self._residual(eq, X0)[0]
        deps = set()
        for c in range(self.params.D):
            X1 = X0.copy()
            X1[0, c] = 0.71
            if abs(self._residual(eq, X1)[0] - base) > 1e-12:
                deps.add(c)
        return deps

    def complete(self, Xb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Full coordinates from base coordinates, and the feasibility mask."""
        G = len(Xb)
        X = np.zeros((G, self.params.D))
        X[:, self.base] = Xb
        ok = np.ones(G, dtype=bool)
        for c, eq in self.eliminated:
            X0, X1 = X.copy(), X.copy()
            X0[:, c], X1[:, c] = 0.0, 1.0
            r0, r1 = self._residual(eq, X0), self._residual(eq, X1)
            a = r1 - r0
            good = np.abs(a) > 1e-12
            val = np.where(good, -r0 / np.where(good, a, 1.0), 0.0)
            ok &= good | (np.abs(r0) <= FEAS_TOL)
            X[:, c] = val
        ok &= self.params.valid(X)
        return X, ok

    def check(self, X: np.ndarray, tol: float = FEAS_TOL, eq_tol: float = FEAS_TOL) -> np.ndarray:
        A = self.params.tables(X, atoms=True)
        ok = np.ones(len(X), dtype=bool)
        for n, rel in self.items:
            for kind, res in relation_residuals(self.net, n, rel, A):
                ok &= (res >= -tol) if kind == "ge" else (np.abs(res) <= eq_tol)
        return ok


def _grid_axes(ranges, step):
    axes = []
    for lo, hi in ranges:
        if hi - lo <= 0:
            axes.append(np.array([lo]))
            continue
        m = max(1, int(round((hi - lo) / step)))
        axes.append(np.linspace(lo, hi, m + 1))
    return axes


def _iter_grid(axes, chunk):
    if not axes:
        yield np.zeros((1, 0))
        return
    sizes = [len(a) for a in axes]
    total = int(np.prod(sizes))
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk))
        cols = []
        for a, s in zip(reversed(axes), reversed(sizes)):
            cols.append(a[idx % s])
            idx = idx // s
        yield np.column_stack(list(reversed(cols)))


# ---------------------------------------------------------------------------
# Grid bounds for queries
# ---------------------------------------------------------------------------

def grid_bounds(net: Network, query: Query, grid: GridSpec | None = None,
                kind: str = "influence") -> GridResult:
    """Extremes of a query over the feasible parameter grid.

    ``kind`` is ``"influence"`` for ``P(q|e) - P(q)`` or ``"marginal"`` for
    ``P(q|e)`` (``P(q)`` without evidence).  Completions with
    ``P(e) < 1e-6`` are excluded.
    """
    grid = grid or GridSpec()
    if net.logic_assessments:
        raise NetworkError("the grid oracle does not support logic assessments")
    if kind not in ("influence", "marginal"):
        raise ValueError(f"unknown query kind {kind!r}")
    ev = query.evidence_map
    if kind == "influence" and not ev:
        raise NetworkError("an influence query needs evidence")
    names = net.ancestors([query.target] + list(ev))
    joint = _Joint(net, names)
    params = _Params(net, joint.names)
    feas = _Feasible(net, params)
    step = grid.resolve(len(feas.base))
    m_qe = joint.mask({**ev, query.target: query.value})
    m_e = joint.mask(ev)
    m_q = joint.mask({query.target: query.value})

    def objective(X):
        p = joint.probabilities(params.tables(X))
        pe = p[:, m_e].sum(axis=1)
        good = pe >= MIN_EVIDENCE
        cond = p[:, m_qe].sum(axis=1) / np.where(good, pe, 1.0)
        if kind == "marginal":
            return cond, good
        return cond - p[:, m_q].sum(axis=1), good

    def evaluate(Xb):
        X, ok = feas.complete(Xb)
        if feas.unsolved:
            A = params.tables(X, atoms=True)
            for n, rel, r in feas.unsolved:
                res = relation_residuals(net, n, rel, A)[r][1]
                ok &= np.abs(res) <= max(FEAS_TOL, step)
        ok &= feas.check(X, eq_tol=max(FEAS_TOL, step) if feas.unsolved else 1e-7)
        val, good = objective(X)
        return val, ok & good, X

    ranges = [params.coord_range[c] for c in feas.base]
    axes = _grid_axes(ranges, step)
    n_points, n_feas = 0, 0
    best = {"min": (math.inf, None), "max": (-math.inf, None)}
    for Xb in _iter_grid(axes, grid.chunk):
        val, ok, _ = evaluate(Xb)
        n_points += len(Xb)
        n_feas += int(ok.sum())
        if not ok.any():
            continue
        v = np.where(ok, val, np.inf)
        i = int(np.argmin(v))
        if v[i] < best["min"][0]:
            best["min"] = (float(v[i]), Xb[i].copy())
        v = np.where(ok, val, -np.inf)
        i = int(np.argmax(v))
        if v[i] > best["max"][0]:
            best["max"] = (float(v[i]), Xb[i].copy())
    if n_feas == 0:
        raise NetworkError("no feasible grid point")

    for sense in ("min", "max"):
        sgn = 1.0 if sense == "min" else -1.0
        value, x = best[sense]
        sub = step
        for _ in range(grid.refine):
            sub /= 10.0
            value, x = _coordinate_search(evaluate, x, value, sgn, sub, ranges)
        best[sense] = (value, x)

    def named(x):
        X, _ = feas.complete(x[None])
        return {params.coord_info[c]: float(X[0, c]) for c in range(params.D)}

    return GridResult(best["min"][0], best["max"][0], step, n_points, n_feas,
                      named(best["min"][1]), named(best["max"][1]))


def _coordinate_search(evaluate, x, value, sgn, sub, ranges, radius: int = 10, sweeps: int = 4):
    """Improve ``x`` one coordinate at a time on a local lattice of spacing ``sub``."""
    if len(x) == 0:
        return value, x
    offsets = np.arange(-radius, radius + 1) * sub
    for _ in range(sweeps):
        improved = False
        for c in range(len(x)):
            lo, hi = ranges[c]
            cand = np.repeat(x[None], len(offsets), axis=0)
            cand[:, c] = np.clip(x[c] + offsets, lo, hi)
            val, ok, _ = evaluate(cand)
            v = np.where(ok, sgn * val, np.inf)
            i = int(np.argmin(v))
            if v[i] < sgn * value - 1e-15:
                value, x = float(val[i]), cand[i].copy()
                improved = True
        # pairwise moves catch ridges where two coordinates must move together
        for c1, c2 in itertools.combinations(range(len(x)), 2):
            for s1, s2 in ((1, 1), (1, -1)):
                cand = np.repeat(x[None], len(offsets), axis=0)
                cand[:, c1] = np.clip(x[c1] + s1 * offsets, *ranges[c1])
                cand[:, c2] = np.clip(x[c2] + s2 * offsets, *ranges[c2])
                val, ok, _ = evaluate(cand)
                v = np.where(ok, sgn * val, np.inf)
                i = int(np.argmin(v))
                if v[i] < sgn * value - 1e-15:
                    value, x = float(val[i]), cand[i].copy()
                    improved = True
        if not improved:
            break
    return value, x


# ---------------------------------------------------------------------------
# Grid maximum likelihood
# ---------------------------------------------------------------------------

def _count_table(counts, name: str, net: Network) -> np.ndarray:
    if isinstance(counts, Mapping):
        return np.asarray(counts[name], dtype=float)
    return np.asarray(counts.table(name), dtype=float)


def grid_ml(net: Network, counts, grid: GridSpec | None = None) -> GridML:
    """Maximum-likelihood CPTs by grid search, node by node.

    Nodes without relations get relative frequencies.  For a constrained
    node the last unconstrained binary coordinate is optimized in closed form
    over its feasible interval, the others by enumeration at ``grid.step``
    followed by three rounds of coordinate refinement at one tenth of the
    previous spacing.
    """
    grid = grid or GridSpec(step=0.005)
    estimates, per_node = {}, {}
    step_used = grid.step or 0.0
    for spec in net.nodes:
        n = spec.name
        N = _count_table(counts, n, net)
        card, K = N.shape
        est = np.zeros((card, K))
        for k in range(K):
            if k in spec.numeric_rows:
                est[:, k] = spec.numeric_rows[k]
            else:
                tot = N[:, k].sum()
                est[:, k] = N[:, k] / tot if tot > 0 else 1.0 / card
        if spec.relations:
            est, step_used = _grid_ml_node(net, n, N, grid)
        estimates[n] = est
        per_node[n] = _loglik(N, est)
    return GridML(estimates, float(sum(per_node.values())), per_node, step_used)


def _loglik(N: np.ndarray, est: np.ndarray) -> float:
    mask = N > 0
    with np.errstate(divide="ignore"):
        return float(np.sum(N[mask] * np.log(est[mask])))


def _grid_ml_node(net: Network, name: str, N: np.ndarray, grid: GridSpec):
    spec = net.node(name)
    plain = net.node(name).__class__(name, spec.parents, spec.numeric_rows, spec.relations,
                                     spec.interval_rows, spec.tau, spec.qualitative, None)
    sub = Network(net.variables, tuple(plain if s.name == name else s for s in net.nodes),
                  ())
    params = _Params(sub, [name])
    if params.D > 4:
        raise NetworkError(f"node {name!r} has {params.D} free parameters (grid limit 4)")
    feas = _Feasible(sub, params)
    step = grid.resolve(len(feas.base)) if grid.step is None else grid.step

    eq_coords = set()
    for eq in feas.eqs:
        eq_coords |= feas._dependencies(eq)
    analytic = None
    for pos in reversed(range(len(feas.base))):
        c = feas.base[pos]
        row = next(r for r in params.rows if c in r.coords)
        if row.card == 2 and c not in eq_coords:
            analytic = (pos, c, row)
            break
    ineqs = [(n, rel) for n, rel in feas.items]

    def loglik(X):
        t = params.tables(X)[name]
        with np.errstate(divide="ignore", invalid="ignore"):
            terms = np.where(N[None] > 0, N[None] * np.log(np.maximum(t, 0.0)), 0.0)
        return terms.sum(axis=(1, 2))

    def evaluate(Xb):
        Xb = Xb.copy()
        if analytic is not None:
            pos, c, row = analytic
            X, _ = feas.complete(Xb)
            L = np.full(len(Xb), params.coord_range[c][0])
            U = np.full(len(Xb), params.coord_range[c][1])
            ok = np.ones(len(Xb), dtype=bool)
            X0, X1 = X.copy(), X.copy()
            X0[:, c], X1[:, c] = 0.0, 1.0
            A0, A1 = params.tables(X0, atoms=True), params.tables(X1, atoms=True)
            for n, rel in ineqs:
                for (kind, r0), (_, r1) in zip(relation_residuals(sub, n, rel, A0),
                                               relation_residuals(sub, n, rel, A1)):
                    if kind != "ge":
                        continue
                    a = r1 - r0
                    pos_a, neg_a = a > 1e-14, a < -1e-14
                    root = -r0 / np.where(np.abs(a) > 1e-14, a, 1.0)
                    L = np.where(pos_a, np.maximum(L, root), L)
                    U = np.where(neg_a, np.minimum(U, root), U)
                    ok &= ~(~pos_a & ~neg_a & (r0 < -FEAS_TOL))
            n0, n1 = N[0, row.k], N[1, row.k]
            target = n0 / (n0 + n1) if n0 + n1 > 0 else L
            Xb[:, pos] = np.clip(target, L, np.maximum(L, U))
            ok &= L <= U + FEAS_TOL
        else:
            ok = np.ones(len(Xb), dtype=bool)
        X, ok2 = feas.complete(Xb)
        ok &= ok2 & feas.check(X, tol=FEAS_TOL * 10, eq_tol=1e-9)
        return loglik(X), ok, X

    ranges = [params.coord_range[c] for c in feas.base]
    enum_ranges = list(ranges)
    if analytic is not None:
        enum_ranges[analytic[0]] = (ranges[analytic[0]][0], ranges[analytic[0]][0])
    axes = _grid_axes(enum_ranges, step)
    best_v, best_x = -math.inf, None
    for Xb in _iter_grid(axes, grid.chunk):
        val, ok, _ = evaluate(Xb)
        if not ok.any():
            continue
        v = np.where(ok, val, -np.inf)
        i = int(np.argmax(v))
        if v[i] > best_v:
            best_v, best_x = float(v[i]), Xb[i].copy()
    if best_x is None:
        raise NetworkError(f"node {name!r}: no feasible grid point")
    # evaluate() overwrote the analytic coordinate; recover the completed point
    _, _, X = evaluate(best_x[None])
    best_x = X[0, feas.base]
    sub_step = step
    for _ in range(3):
        sub_step /= 10.0
        best_v, best_x = _coordinate_search(evaluate, best_x, best_v, -1.0, sub_step, ranges,
                                            sweeps=3)
        _, _, X = evaluate(best_x[None])
        best_x = X[0, feas.base]
    _, _, X = evaluate(best_x[None])
    return params.tables(X)[name][0], step


# ---------------------------------------------------------------------------
# EMAJSAT
# ---------------------------------------------------------------------------

def emajsat_brute(phi: BooleanFormula, k: int, variables: Sequence[str] | None = None) -> bool:
    """Some assignment of the first ``k`` variables makes a strict majority
    of the remaining worlds satisfy ``phi``."""
    xs = list(variables) if variables is not None else formula_variables(phi)
    if not 1 <= k <= len(xs):
        raise ValueError(f"k={k} must lie in [1, {len(xs)}]")
    if len(xs) > 20:
        raise ValueError("emajsat_brute is limited to 20 variables")
    head, tail = xs[:k], xs[k:]
    for xv in itertools.product((True, False), repeat=len(head)):
        assign = dict(zip(head, xv))
        sat = sum(phi.evaluate({**assign, **dict(zip(tail, yv))})
                  for yv in itertools.product((True, False), repeat=len(tail)))
        if 2 * sat > 2 ** len(tail):
            return True
    return False
