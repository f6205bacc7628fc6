"""Spatial branch-and-bound for multilinear programs.

Every node solves a linear relaxation in which each bilinear product
``w = u*v`` is replaced by a fresh column bounded by its McCormick envelope
over the node box.  Reformulation-linearization rows (normalization rows
multiplied by a partner variable, and products of pairs of linear relation
inequalities) tighten the relaxation.  Interval propagation shrinks the box
of every node before its LP is solved, and a reduced-space local search
turns relaxation points into feasible incumbents.

All compiled variables are nonnegative (probabilities, messages and their
products), which the interval propagation relies on.
"""

from __future__ import annotations

import heapq
import itertools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.optimize import minimize

from .compile import MultilinearProgram
from .constraints import ParamVar
from .lp import LP_FEAS_TOL, LinearProgram, LPResult, lp_solve

INNER_MARGIN = 1e-10


@dataclass
class SolverOptions:
    gap: float = 1e-4
    max_nodes: int = 100_000
    feas_tol: float = 1e-7
    refine_iters: int = 30
    seed: int = 0
    multistart: int = 4
    refine_every: int = 10
    progress_every: int = 0
    progress: Callable[[str], None] | None = None
    threads: int = 1
    obbt: bool = True
    rlt_products: int = 300
    # wall-clock budget in seconds; hitting it makes the result timing-dependent
    time_limit: float | None = None
    # decision mode: stop once the optimum is known to lie on one side of this value
    decide: float | None = None

    def __post_init__(self):
        if self.gap <= 0 or self.feas_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_nodes < 1:
            raise ValueError("max_nodes must be at least 1")


@dataclass
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def copy(self) -> Box:
        return Box(self.lo.copy(), self.hi.copy())

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    def contains(self, x: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def split(self, i: int, at: float) -> tuple[Box, Box]:
        left, right = self.copy(), self.copy()
        left.hi[i] = at
        right.lo[i] = at
        return left, right


@dataclass
class SolveResult:
    """Outcome of one solve.

    ``bound`` is certified: no feasible point beats it.  ``incumbent`` is the
    objective at ``point``, a feasible point found along the way.
    """

    sense: str
    bound: float
    incumbent: float | None
    point: dict[ParamVar, float] | None
    gap: float
    nodes: int
    status: str
    history: list[tuple[int, float, float | None]] = field(default_factory=list)
    root_bound: float | None = None

    @property
    def converged(self) -> bool:
        return self.status == "converged"


# ---------------------------------------------------------------------------
# Index-space structure of a program
# ---------------------------------------------------------------------------

def _is_normalization(c) -> bool:
    return (c.cmp == "=" and abs(c.rhs - 1.0) < 1e-15 and c.degree == 1
            and all(m.coef == 1.0 for m in c.terms) and len(c.terms) >= 2)


class _Structure:
    """Columns, static relaxation rows, propagation rows and the definition DAG."""

    def __init__(self, program: MultilinearProgram, rlt_products: int = 300):
        self.program = program
        self.vars = program.variables
        self.index = {v: n for n, v in enumerate(self.vars)}
        self.n = len(self.vars)
        boxes = program.constraints.boxes
        self.lo0 = np.array([boxes[v][0] for v in self.vars], dtype=float)
        self.hi0 = np.array([boxes[v][1] for v in self.vars], dtype=float)
        if np.any(self.lo0 < -1e-12):
            raise ValueError("solver assumes nonnegative variables")
        self.lo0 = np.maximum(self.lo0, 0.0)
        idx = self.index

        def mono_idx(m):
            return tuple(sorted(idx[v] for v in m.vars))

        self.rows = [([(m.coef, mono_idx(m)) for m in c.terms], c.cmp, c.rhs)
                     for c in program.constraints.constraints]
        self.obj_terms = [(m.coef, mono_idx(m)) for m in program.objective]
        self.obj_const = program.objective_constant
        self.pair_col: dict[tuple[int, int], int] = {}
        for terms, _, _ in self.rows:
            for _, ix in terms:
                if len(ix) == 2:
                    self._pair(ix)
        self.frac_terms = None
        if program.fraction is not None:
            self.frac_terms = tuple([(m.coef, mono_idx(m)) for m in part]
                                    for part in program.fraction)
        for _, ix in self.obj_terms + sum(self.frac_terms or (), []):
            if len(ix) > 2:
                raise ValueError("objective degree exceeds 2")
            if len(ix) == 2:
                self._pair(ix)
        self.static: list[tuple[dict[int, float], str, float]] = []
        for terms, cmp, rhs in self.rows:
            self.static.append((self._linearize(terms), cmp, rhs))
        self.norm_rows = [row for row, c in zip(self.rows, program.constraints.constraints)
                          if _is_normalization(c)]
        self._add_rlt(program, rlt_products)
        self._build_static()
        self._build_definitions(program)
        pe = program.handles.get("pe")
        self.scale_idx = idx[pe] if pe is not None else None

    # -- columns ----------------------------------------------------------
    def _pair(self, ix: tuple[int, int]) -> int:
        key = (min(ix), max(ix))
        col = self.pair_col.get(key)
        if col is None:
            col = self.n + len(self.pair_col)
            self.pair_col[key] = col
        return col

    def _linearize(self, terms) -> dict[int, float]:
        row: dict[int, float] = {}
        for coef, ix in terms:
            if not ix:
                continue
            col = ix[0] if len(ix) == 1 else self._pair(ix)
            row[col] = row.get(col, 0.0) + coef
        return row

    def _add_rlt(self, program, cap):
        partners: dict[int, set[int]] = {}
        for a, b in list(self.pair_col):
            partners.setdefault(a, set()).add(b)
            partners.setdefault(b, set()).add(a)
        # normalization row times a variable already paired with a member
        for terms, _, _ in self.norm_rows:
            members = {ix[0] for _, ix in terms}
            us = set()
            for m in members:
                us |= partners.get(m, set())
            for u in sorted(us - members):
                if self.hi0[u] - self.lo0[u] <= 0:
                    continue
                row = {self._pair((u, m)): 1.0 for m in sorted(members)}
                row[u] = row.get(u, 0.0) - 1.0
                self.static.append((row, "=", 0.0))
        # products of pairs of linear relation inequalities
        lin = []
        for c, (terms, cmp, rhs) in zip(program.constraints.constraints, self.rows):
            if c.cmp != "=" and c.degree == 1 and c.tag not in ("evidence positive",):
                sign = 1.0 if cmp == ">=" else -1.0
                lin.append(([(sign * k, ix[0]) for k, ix in terms], sign * rhs))
        # relation inequality times the bound factors of a partner variable;
        # built per node in relaxation() since the factors depend on the box
        self.bound_factor = []
        for terms, rhs in lin:
            members = {i for _, i in terms}
            us = set()
            for m in members:
                us |= partners.get(m, set())
            for u in sorted(us - members):
                if self.hi0[u] - self.lo0[u] <= 0 or len(self.bound_factor) >= cap:
                    continue
                cols = [(k, self._pair((u, i)), i) for k, i in terms]
                self.bound_factor.append((cols, rhs, u))
        added = 0
        for (t1, r1), (t2, r2) in itertools.combinations(lin, 2):
            if added >= cap:
                break
            v1 = {i for _, i in t1}
            v2 = {i for _, i in t2}
            if v1 & v2:
                continue
            if not any((min(a, b), max(a, b)) in self.pair_col for a in v1 for b in v2):
                continue
            # (t1 - r1) * (t2 - r2) >= 0
            row: dict[int, float] = {}
            for k1, a in t1:
                for k2, b in t2:
                    col = self._pair((a, b))
                    row[col] = row.get(col, 0.0) + k1 * k2
            for k1, a in t1:
                row[a] = row.get(a, 0.0) - k1 * r2
            for k2, b in t2:
                row[b] = row.get(b, 0.0) - k2 * r1
            self.static.append((row, ">=", -r1 * r2))
            added += 1

    def _build_static(self):
        self.ncol = self.n + len(self.pair_col)
        eq = [(r, rhs) for r, cmp, rhs in self.static if cmp == "="]
        ub = [(r, rhs) if cmp == "<=" else ({k: -v for k, v in r.items()}, -rhs)
              for r, cmp, rhs in self.static if cmp != "="]
        self.A_eq = np.zeros((len(eq), self.ncol))
        self.b_eq = np.array([rhs for _, rhs in eq], dtype=float)
        for n, (r, _) in enumerate(eq):
            for k, v in r.items():
                self.A_eq[n, k] = v
        self.A_ub_static = np.zeros((len(ub), self.ncol))
        self.b_ub_static = np.array([rhs for _, rhs in ub], dtype=float)
        for n, (r, _) in enumerate(ub):
            for k, v in r.items():
                self.A_ub_static[n, k] = v
        pairs = sorted(self.pair_col.items(), key=lambda kv: kv[1])
        self.pu = np.array([a for (a, _), _ in pairs], dtype=int)
        self.pv = np.array([b for (_, b), _ in pairs], dtype=int)
        self.pw = np.array([c for _, c in pairs], dtype=int)
        self.c = np.zeros(self.ncol)
        for k, v in self._linearize(self.obj_terms).items():
            self.c[k] += v
        self.obj_const += sum(coef for coef, ix in self.obj_terms if not ix)
        self.frac = None
        if self.frac_terms is not None:
            parts = []
            for terms in self.frac_terms:
                vec = np.zeros(self.ncol)
                for k, v in self._linearize(terms).items():
                    vec[k] += v
                parts.append((vec, sum(coef for coef, ix in terms if not ix)))
            self.frac = tuple(parts)
        self.columns = tuple(self.vars) + tuple(
            (self.vars[a], self.vars[b]) for (a, b), _ in pairs)

    # -- definitions -------------------------------------------------------
    def _build_definitions(self, program):
        idx = self.index
        defs = {}
        self.general = []
        for c, row in zip(program.constraints.constraints, self.rows):
            if c.defines is not None and c.defines in idx and idx[c.defines] not in defs:
                x = idx[c.defines]
                a_terms, b_terms = [], []
                for coef, ix in row[0]:
                    if x in ix:
                        a_terms.append((coef, tuple(i for i in ix if i != x)))
                    else:
                        b_terms.append((coef, ix))
                defs[x] = (a_terms, b_terms, c.rhs)
            elif c.tag != "total probability":
                # total-probability rows follow from normalization; their zero
                # gradient would make the local solver's constraint matrix singular
                self.general.append(row)
        # topological order over definitions
        order, state = [], {}

        def visit(x):
            if state.get(x) == 2:
                return
            if state.get(x) == 1:
                raise ValueError("cyclic variable definitions")
            state[x] = 1
            a_terms, b_terms, _ = defs[x]
            for _, ix in a_terms + b_terms:
                for i in ix:
                    if i in defs:
                        visit(i)
            state[x] = 2
            order.append(x)

        for x in sorted(defs):
            visit(x)
        self.defs = [(x,) + defs[x] for x in order]
        self.defined = set(defs)
        self.indep = [i for i in range(self.n) if i not in defs]
        self.free = [i for i in self.indep if self.hi0[i] > self.lo0[i]]
        self.free_pos = {i: n for n, i in enumerate(self.free)}
        self.norm_groups = []
        for terms, _, _ in self.norm_rows:
            members = [ix[0] for _, ix in terms]
            if all(m in self.free_pos or (m not in self.defined) for m in members):
                self.norm_groups.append(members)

    # -- relaxation ---------------------------------------------------------
    def relaxation(self, lo: np.ndarray, hi: np.ndarray) -> LinearProgram:
        P = len(self.pw)
        lu, hu, lv, hv = lo[self.pu], hi[self.pu], lo[self.pv], hi[self.pv]
        M = np.zeros((4 * P, self.ncol))
        b = np.empty(4 * P)
        r = np.arange(P)
        # w >= lv*u + lu*v - lu*lv ; w >= hv*u + hu*v - hu*hv
        M[4 * r, self.pu] = lv
        M[4 * r, self.pv] = lu
        M[4 * r, self.pw] = -1.0
        b[4 * r] = lu * lv
        M[4 * r + 1, self.pu] = hv
        M[4 * r + 1, self.pv] = hu
        M[4 * r + 1, self.pw] = -1.0
        b[4 * r + 1] = hu * hv
        # w <= lv*u + hu*v - hu*lv ; w <= hv*u + lu*v - lu*hv
        M[4 * r + 2, self.pu] = -lv
        M[4 * r + 2, self.pv] = -hu
        M[4 * r + 2, self.pw] = 1.0
        b[4 * r + 2] = -hu * lv
        M[4 * r + 3, self.pu] = -hv
        M[4 * r + 3, self.pv] = -lu
        M[4 * r + 3, self.pw] = 1.0
        b[4 * r + 3] = -lu * hv
        col_lo = np.concatenate([lo, lu * lv])
        col_hi = np.concatenate([hi, hu * hv])
        F = np.zeros((2 * len(self.bound_factor), self.ncol))
        f = np.zeros(2 * len(self.bound_factor))
        for n, (cols, rhs, u) in enumerate(self.bound_factor):
            # (L - rhs)(u - lo_u) >= 0 and (L - rhs)(hi_u - u) >= 0, as <= rows
            for k, w, i in cols:
                F[2 * n, w] -= k
                F[2 * n, i] += k * lo[u]
                F[2 * n + 1, w] += k
                F[2 * n + 1, i] -= k * hi[u]
            F[2 * n, u] += rhs
            f[2 * n] = rhs * lo[u]
            F[2 * n + 1, u] -= rhs
            f[2 * n + 1] = -rhs * hi[u]
        return LinearProgram(self.c.copy(), np.vstack([self.A_ub_static, M, F]),
                             np.concatenate([self.b_ub_static, b, f]),
                             self.A_eq, self.b_eq, col_lo, col_hi,
                             constant=self.obj_const, columns=self.columns)

    # -- interval propagation ------------------------------------------------
    def fbbt(self, lo: np.ndarray, hi: np.ndarray, passes: int = 10,
             tol: float = 1e-9) -> tuple[np.ndarray, np.ndarray] | None:
        """Shrink ``[lo, hi]`` by propagating every row; None when empty."""
        L, H = lo.tolist(), hi.tolist()
        for _ in range(passes):
            changed = False
            for terms, cmp, rhs in self.rows:
                tl, th = [], []
                for coef, ix in terms:
                    if len(ix) == 1:
                        a, b = L[ix[0]], H[ix[0]]
                    else:
                        a, b = L[ix[0]] * L[ix[1]], H[ix[0]] * H[ix[1]]
                    if coef >= 0:
                        tl.append(coef * a)
                        th.append(coef * b)
                    else:
                        tl.append(coef * b)
                        th.append(coef * a)
                SL, SH = sum(tl), sum(th)
                scale = tol * (1.0 + abs(rhs))
                if cmp != ">=" and SL > rhs + scale:
                    return None
                if cmp != "<=" and SH < rhs - scale:
                    return None
                for n, (coef, ix) in enumerate(terms):
                    t_lo = rhs - (SH - th[n]) if cmp != "<=" else -math.inf
                    t_hi = rhs - (SL - tl[n]) if cmp != ">=" else math.inf
                    if coef > 0:
                        v_lo, v_hi = t_lo / coef, t_hi / coef
                    else:
                        v_lo, v_hi = t_hi / coef, t_lo / coef
                    if len(ix) == 1:
                        targets = [(ix[0], v_lo, v_hi)]
                    else:
                        i, j = ix
                        targets = []
                        for p, q in ((i, j), (j, i)):
                            p_lo = v_lo / H[q] if v_lo > 0 and H[q] > 0 else -math.inf
                            p_hi = v_hi / L[q] if L[q] > 0 else math.inf
                            targets.append((p, p_lo, p_hi))
                    for p, p_lo, p_hi in targets:
                        if p_lo > L[p] + 1e-12 * (1 + abs(L[p])):
                            L[p] = min(p_lo, H[p]) if p_lo <= H[p] + tol else p_lo
                            changed = True
                        if p_hi < H[p] - 1e-12 * (1 + abs(H[p])):
                            H[p] = max(p_hi, L[p]) if p_hi >= L[p] - tol else p_hi
                            changed = True
                        if L[p] > H[p] + tol:
                            return None
                        if L[p] > H[p]:
                            mid = 0.5 * (L[p] + H[p])
                            L[p] = H[p] = mid
            if not changed:
                break
        return np.array(L), np.array(H)

    # -- forward evaluation --------------------------------------------------
    def evaluate(self, y: np.ndarray, grad: bool = False):
        """All variable values (and d/dy) from the free independent coordinates."""
        vals = self.lo0.tolist()
        nf = len(self.free)
        G = np.zeros((self.n, nf)) if grad else None
        for n, i in enumerate(self.free):
            vals[i] = float(y[n])
            if grad:
                G[i, n] = 1.0
        for x, a_terms, b_terms, rhs in self.defs:
            a, b = 0.0, 0.0
            da = np.zeros(nf) if grad else None
            db = np.zeros(nf) if grad else None
            for coef, ix in a_terms:
                a += coef * _prod(vals, ix)
                if grad:
                    da += coef * _dprod(vals, G, ix)
            for coef, ix in b_terms:
                b += coef * _prod(vals, ix)
                if grad:
                    db += coef * _dprod(vals, G, ix)
            if abs(a) < 1e-300:
                a = 1e-300
            val = (rhs - b) / a
            vals[x] = val
            if grad:
                G[x] = (-db - val * da) / a
        return np.array(vals), G

    def objective(self, vals) -> float:
        return self.obj_const + sum(coef * _prod(vals, ix) for coef, ix in self.obj_terms if ix)

    def objective_grad(self, vals, G) -> np.ndarray:
        g = np.zeros(G.shape[1])
        for coef, ix in self.obj_terms:
            if ix:
                g += coef * _dprod(vals, G, ix)
        return g

    def acceptable(self, vals: np.ndarray, tol: float) -> bool:
        """Feasible within ``tol`` scaled by ``P(e)``: an objective divided by
        ``P(e)`` amplifies constraint violations by ``1/P(e)``."""
        if self.scale_idx is not None:
            tol *= min(1.0, max(vals[self.scale_idx], 0.0))
        return self.violation(vals) <= tol

    def violation(self, vals: np.ndarray) -> float:
        worst = max(float(np.max(self.lo0 - vals, initial=0.0)),
                    float(np.max(vals - self.hi0, initial=0.0)))
        for terms, cmp, rhs in self.rows:
            lhs = sum(coef * _prod(vals, ix) for coef, ix in terms)
            d = lhs - rhs
            worst = max(worst, abs(d) if cmp == "=" else (d if cmp == "<=" else -d))
        return worst

    def project(self, x_full: np.ndarray) -> np.ndarray:
        """Free coordinates of ``x_full`` clipped into the root box, with
        normalization rows repaired."""
        v = np.clip(np.asarray(x_full[: self.n], dtype=float), self.lo0, self.hi0)
        for members in self.norm_groups:
            m = np.array(members)
            v[m] = _simplex_box(v[m], self.lo0[m], self.hi0[m])
        return v[self.free] if self.free else np.zeros(0)


def _prod(vals, ix) -> float:
    p = 1.0
    for i in ix:
        p *= vals[i]
    return p


def _dprod(vals, G, ix) -> np.ndarray:
    if len(ix) == 0:
        return np.zeros(G.shape[1])
    if len(ix) == 1:
        return G[ix[0]]
    i, j = ix
    return vals[j] * G[i] + vals[i] * G[j]


def _simplex_box(v: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Scale onto the simplex, then shift-and-clip into ``[lo, hi]``."""
    s = v.sum()
    w = v / s if s > 0 else np.full_like(v, 1.0 / len(v))
    if np.all(w >= lo) and np.all(w <= hi):
        return w
    if lo.sum() > 1.0 or hi.sum() < 1.0:
        return np.clip(w, lo, hi)
    a, b = float(np.min(w - hi)), float(np.max(w - lo))
    for _ in range(100):
        lam = 0.5 * (a + b)
        if np.clip(w - lam, lo, hi).sum() > 1.0:
            a = lam
        else:
            b = lam
    out = np.clip(w - 0.5 * (a + b), lo, hi)
    return out


# ---------------------------------------------------------------------------
# Public pieces
# ---------------------------------------------------------------------------

def relax_mccormick(program: MultilinearProgram, box: Box | None = None) -> LinearProgram:
    """LP relaxation of ``program`` over ``box`` as a minimization.

    Columns are the program variables in canonical order followed by one
    column per bilinear pair; ``LinearProgram.columns`` names them.  A
    max-sense program is returned with its objective negated.
    """
    st = _Structure(program)
    lo, hi = (st.lo0, st.hi0) if box is None else (box.lo, box.hi)
    lp = st.relaxation(np.asarray(lo, float), np.asarray(hi, float))
    if program.sense == "max":
        lp.c = -lp.c
        lp.constant = -lp.constant
    return lp


def local_refine(program: MultilinearProgram, start: Mapping[ParamVar, float] | np.ndarray,
                 options: SolverOptions | None = None) -> dict[ParamVar, float] | None:
    """Feasible point near ``start`` with an objective at least as good, or None."""
    options = options or SolverOptions()
    st = _Structure(program, rlt_products=0)
    if isinstance(start, Mapping):
        mid = 0.5 * (st.lo0 + st.hi0)
        x = np.array([start.get(v, mid[n]) for n, v in enumerate(st.vars)], dtype=float)
    else:
        x = np.asarray(start, dtype=float)
    sign = -1.0 if program.sense == "max" else 1.0
    out = _refine(st, x, sign, options)
    if out is None:
        return None
    vals, _ = out
    if isinstance(start, Mapping) and len(start) == st.n:
        x0 = np.array([start[v] for v in st.vars], dtype=float)
        if st.violation(x0) <= options.feas_tol and \
                sign * st.objective(vals) >= sign * st.objective(x0) - 1e-12:
            return dict(start)
    return {v: float(vals[n]) for n, v in enumerate(st.vars)}


def _refine(st: _Structure, x_full: np.ndarray, sign: float, options: SolverOptions,
            polish: bool = True):
    """Project, optionally run SLSQP in the free space, and keep the better
    feasible candidate.  Returns ``(values, internal objective)`` or None."""
    y0 = st.project(x_full)
    best = None
    vals0, _ = st.evaluate(y0)
    if st.acceptable(vals0, options.feas_tol):
        best = (vals0, sign * st.objective(vals0))
    if not polish or not st.free:
        return best
    cache = {}

    def ev(y):
        key = y.tobytes()
        if key not in cache:
            cache.clear()
            cache[key] = st.evaluate(y, grad=True)
        return cache[key]

    def rows_of(kind):
        sel = [r for r in st.general if (r[1] == "=") == (kind == "eq")]
        if not sel:
            return None

        def fun(y):
            vals, _ = ev(y)
            out = []
            for terms, cmp, rhs in sel:
                d = sum(c * _prod(vals, ix) for c, ix in terms) - rhs
                # inequalities are kept slightly inside so the result is exactly feasible
                out.append(d if cmp == "=" else (-d if cmp == "<=" else d) - INNER_MARGIN)
            return np.array(out)

        def jac(y):
            vals, G = ev(y)
            out = []
            for terms, cmp, rhs in sel:
                g = np.zeros(len(y))
                for c, ix in terms:
                    g += c * _dprod(vals, G, ix)
                out.append(-g if cmp == "<=" else g)
            return np.array(out)

        return {"type": kind, "fun": fun, "jac": jac}

    def f(y):
        vals, G = ev(y)
        return sign * st.objective(vals), sign * st.objective_grad(vals, G)

    cons = [c for c in (rows_of("eq"), rows_of("ineq")) if c is not None]
    bounds = [(st.lo0[i], st.hi0[i]) for i in st.free]
    try:
        res = minimize(f, y0, jac=True, method="SLSQP", bounds=bounds, constraints=cons,
                       options={"maxiter": options.refine_iters, "ftol": 1e-12})
        y1 = res.x
    except (ValueError, FloatingPointError, np.linalg.LinAlgError):
        return best
    if not np.all(np.isfinite(y1)):
        return best
    full = st.lo0.copy()
    full[st.free] = y1
    vals1, _ = st.evaluate(st.project(full))
    if st.acceptable(vals1, options.feas_tol):
        cand = (vals1, sign * st.objective(vals1))
        if best is None or cand[1] < best[1] - 1e-12:
            best = cand
    return best


# ---------------------------------------------------------------------------
# Branch and bound
# ---------------------------------------------------------------------------

def solve(program: MultilinearProgram, options: SolverOptions | None = None) -> SolveResult:
    options = options or SolverOptions()
    program.check()
    st = _Structure(program, rlt_products=options.rlt_products)
    sign = -1.0 if program.sense == "max" else 1.0
    c_int = sign * st.c
    const_int = sign * st.obj_const
    rng = np.random.default_rng(options.seed)
    deadline = None if options.time_limit is None else time.monotonic() + options.time_limit

    def ext(v):
        return None if v is None else sign * v

    def bound_lp(lo, hi):
        lp = st.relaxation(lo, hi)
        lp.c = c_int
        lp.constant = const_int
        res = lp_solve(lp)
        if st.frac is not None and res.status != "infeasible":
            # both bounds are valid; keep the stronger one
            # the scaled LP only tightens; feasibility is decided by the plain one
            alt = _fractional_bound(st, lp, lo, hi, sign)
            if alt.optimal and (not res.optimal or alt.value > res.value):
                return alt
        return res

    inc_val, inc_vals = math.inf, None
    history: list[tuple[int, float, float | None]] = []

    def offer(vals, val):
        nonlocal inc_val, inc_vals
        if vals is not None and val < inc_val:
            inc_val, inc_vals = val, vals

    def point_of(vals):
        return None if vals is None else {v: float(vals[n]) for n, v in enumerate(st.vars)}

    def result(status, bound_int, nodes):
        if status == "infeasible":
            b = math.inf
            return SolveResult(program.sense, sign * b, None, None, math.inf, nodes, status,
                               history, root_bound=None)
        gap = (inc_val - bound_int) if inc_vals is not None else math.inf
        return SolveResult(program.sense, sign * bound_int,
                           ext(inc_val) if inc_vals is not None else None,
                           point_of(inc_vals), max(gap, 0.0), nodes, status, history,
                           root_bound=sign * root_bound)

    box = st.fbbt(st.lo0.copy(), st.hi0.copy(), passes=30)
    if box is None:
        return result("infeasible", math.inf, 0)
    lo, hi = box
    root = bound_lp(lo, hi)
    if root.status == "infeasible":
        return result("infeasible", math.inf, 1)
    if options.obbt and root.optimal:
        tightened = _obbt(st, lo, hi)
        if tightened is None:
            return result("infeasible", math.inf, 1)
        lo, hi = tightened
        root = bound_lp(lo, hi)
        if root.status == "infeasible":
            return result("infeasible", math.inf, 1)
    root_bound = root.value if root.optimal else -math.inf

    # incumbent heuristics at the root
    starts = []
    if root.x is not None:
        starts.append(root.x[: st.n])
    for _ in range(options.multistart):
        starts.append(rng.uniform(st.lo0, st.hi0))
    for s in starts:
        out = _refine(st, s, sign, options)
        if out is not None:
            offer(*out)

    tol = options.gap
    counter = itertools.count()
    heap: list[tuple[float, int, np.ndarray, np.ndarray, LPResult]] = []
    closed = math.inf
    nodes = 1
    if root_bound < inc_val - tol or inc_vals is None:
        heapq.heappush(heap, (root_bound, next(counter), lo, hi, root))
    else:
        closed = root_bound
    certified = min(closed, heap[0][0]) if heap else closed

    def record():
        history.append((nodes, sign * certified, ext(inc_val) if inc_vals is not None else None))
        if options.progress and options.progress_every and nodes % options.progress_every == 0:
            g = inc_val - certified if inc_vals is not None else math.inf
            options.progress(f"nodes={nodes} bound={sign * certified:.9g} "
                             f"incumbent={ext(inc_val) if inc_vals is not None else 'none'} "
                             f"gap={g:.3g}")

    record()

    def decided():
        if options.decide is None:
            return False
        d = sign * options.decide
        return (inc_vals is not None and inc_val < d) or certified >= d

    executor = ThreadPoolExecutor(options.threads) if options.threads > 1 else None

    def child(lo_c, hi_c):
        prop = st.fbbt(lo_c, hi_c, passes=4)
        if prop is None:
            return None
        lo_c, hi_c = prop
        return lo_c, hi_c, bound_lp(lo_c, hi_c)

    try:
        status = "converged"
        while heap:
            b, _, lo_n, hi_n, lp_n = heap[0]
            if b >= inc_val - tol:
                closed = min(closed, b)
                heap.clear()
                break
            if nodes >= options.max_nodes:
                status = "iteration_limit"
                break
            if deadline is not None and time.monotonic() > deadline:
                status = "time_limit"
                break
            if decided():
                status = "decided"
                break
            heapq.heappop(heap)
            split = _branch_choice(st, lo_n, hi_n, lp_n)
            if split is None:
                # box is (numerically) a point or the relaxation is exact there
                if lp_n.x is not None:
                    out = _refine(st, lp_n.x, sign, options, polish=True)
                    if out is not None:
                        offer(*out)
                closed = min(closed, b)
                certified = min(closed, heap[0][0]) if heap else closed
                record()
                continue
            i, at = split
            kids = []
            for side in (0, 1):
                lo_c, hi_c = lo_n.copy(), hi_n.copy()
                if side == 0:
                    hi_c[i] = at
                else:
                    lo_c[i] = at
                kids.append((lo_c, hi_c))
            outs = list(executor.map(lambda k: child(*k), kids)) if executor else \
                [child(*k) for k in kids]
            for out in outs:
                nodes += 1
                if out is None:
                    continue
                lo_c, hi_c, lp_c = out
                if lp_c.status == "infeasible":
                    continue
                cb = max(b, lp_c.value) if lp_c.optimal else b
                if lp_c.x is not None:
                    polish = inc_vals is None or nodes % max(1, options.refine_every) == 0
                    ref = _refine(st, lp_c.x, sign, options, polish=polish)
                    if ref is not None:
                        offer(*ref)
                if cb >= inc_val - tol:
                    closed = min(closed, cb)
                else:
                    heapq.heappush(heap, (cb, next(counter), lo_c, hi_c, lp_c))
            new_cert = min(closed, heap[0][0]) if heap else closed
            certified = max(certified, new_cert) if math.isfinite(certified) else new_cert
            record()
        if not heap and status == "converged":
            certified = max(certified, closed) if math.isfinite(certified) else closed
    finally:
        if executor:
            executor.shutdown()

    if status == "converged" and inc_vals is None:
        if math.isinf(certified):
            return result("infeasible", math.inf, nodes)
        status = "iteration_limit"
    if status in ("iteration_limit", "time_limit", "decided"):
        certified = min(certified, heap[0][0]) if heap else certified
    if inc_vals is not None:
        certified = min(certified, inc_val)
    history.append((nodes, sign * certified, ext(inc_val) if inc_vals is not None else None))
    return result(status, certified, nodes)


def _fractional_bound(st: _Structure, lp: LinearProgram, lo, hi, sign: float) -> LPResult:
    """Exact minimum of ``sign * num/den`` over the relaxation polytope.

    Charnes-Cooper: with ``y = x * s`` and ``s = 1/den(x)`` the ratio becomes
    linear.  ``den`` is bounded below on the polytope, which keeps ``s``
    finite.  The returned point is mapped back to ``x = y / s``.
    """
    (nv, n0), (dv, d0) = st.frac
    den_lo = float(np.clip(dv, 0, None) @ lp.lo - np.clip(-dv, 0, None) @ lp.hi) + d0
    if den_lo <= 0.0:
        base = lp_solve(LinearProgram(-dv, lp.A_ub, lp.b_ub, lp.A_eq, lp.b_eq, lp.lo, lp.hi,
                                      constant=-d0))
        if base.status == "infeasible":
            return base
        den_lo = -base.value if base.optimal else 0.0
        if den_lo <= 0.0:
            return LPResult("numerical", -math.inf, None, "denominator not bounded away from 0")
    s_hi = 1.0 / den_lo
    n = lp.n
    eye = np.eye(n)
    rows_ub = [np.hstack([lp.A_ub, -lp.b_ub[:, None]]),
               np.hstack([eye, -lp.hi[:, None]]),
               np.hstack([-eye, lp.lo[:, None]])]
    A_ub = np.vstack(rows_ub)
    b_ub = np.zeros(len(A_ub))
    A_eq = np.vstack([np.hstack([lp.A_eq, -lp.b_eq[:, None]]),
                      np.concatenate([dv, [d0]])[None]])
    b_eq = np.concatenate([np.zeros(len(lp.b_eq)), [1.0]])
    c = sign * np.concatenate([nv, [n0]])
    z_lo = np.zeros(n + 1)
    z_hi = np.concatenate([lp.hi * s_hi, [s_hi]])
    res = lp_solve(LinearProgram(c, A_ub, b_ub, A_eq, b_eq, z_lo, z_hi), tol=1e-9)
    if res.x is None:
        return res
    s = res.x[-1]
    if s <= 0:
        return LPResult("numerical", res.value, None, "degenerate scaling")
    x = np.clip(res.x[:-1] / s, lp.lo, lp.hi)
    return LPResult(res.status, res.value, x, res.message)


def _branch_choice(st: _Structure, lo, hi, lp: LPResult):
    """Variable and split point, or None when nothing is worth splitting."""
    widths = hi - lo
    x = lp.x
    if x is not None and len(st.pw):
        viol = np.abs(x[st.pw] - x[st.pu] * x[st.pv])
        order = np.argsort(-viol, kind="stable")
        for p in order[:5]:
            if viol[p] <= 1e-10:
                break
            u, v = int(st.pu[p]), int(st.pv[p])
            i = u if widths[u] >= widths[v] else v
            if widths[i] > 1e-9:
                w = widths[i]
                at = min(max(x[i], lo[i] + 0.2 * w), lo[i] + 0.8 * w)
                return i, float(at)
    # fall back to the widest free independent variable
    cand = [i for i in st.free if widths[i] > 1e-9]
    if not cand or x is None:
        return None
    i = max(cand, key=lambda j: (widths[j], -j))
    if widths[i] < 1e-7:
        return None
    w = widths[i]
    return i, float(min(max(x[i], lo[i] + 0.2 * w), lo[i] + 0.8 * w))


def _obbt(st: _Structure, lo, hi, rounds: int = 1):
    """Optimization-based bound tightening of variables in bilinear pairs."""
    targets = sorted(set(st.pu.tolist()) | set(st.pv.tolist()))
    targets = [i for i in targets if hi[i] - lo[i] > 1e-9]
    if len(targets) > 200:
        return lo, hi
    lo, hi = lo.copy(), hi.copy()
    for _ in range(rounds):
        for i in targets:
            for s in (1.0, -1.0):
                lp = st.relaxation(lo, hi)
                c = np.zeros(st.ncol)
                c[i] = s
                lp.c, lp.constant = c, 0.0
                res = lp_solve(lp)
                if res.status == "infeasible":
                    return None
                if not res.optimal:
                    continue
                # keep the LP feasibility tolerance as slack so later LPs stay feasible
                slack = LP_FEAS_TOL * (1 + abs(res.value))
                if s > 0:
                    lo[i] = max(lo[i], min(res.value - slack, hi[i]))
                else:
                    hi[i] = min(hi[i], max(-res.value + slack, lo[i]))
        out = st.fbbt(lo, hi, passes=10)
        if out is None:
            return None
        lo, hi = out
    return lo, hi
