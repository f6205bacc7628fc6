"""Linear and multilinear constraints over named parameter variables.

Qualitative relations, interval rows and IDM links compile into a
:class:`ConstraintSet`.  Every monomial is multilinear: a variable occurs at
most once per monomial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Union

import numpy as np

from .model import Network, NetworkError, NodeSpec, QualitativeRelation, RelationKind

ROLES = ("theta", "hyper_t", "message", "auxiliary")
COMPARATORS = ("<=", "=", ">=")


@dataclass(frozen=True, order=True)
class ParamVar:
    role: str
    i: int
    j: int = 0
    k: int = 0

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")

    @property
    def name(self) -> str:
        if self.role == "theta":
            return f"θ[{self.i}][{self.j}][{self.k}]"
        if self.role == "hyper_t":
            return f"t[{self.i}][{self.j}][{self.k}]"
        if self.role == "message":
            return f"m[{self.i}][{self.j}]"
        return f"aux[{self.i}]"

    def __str__(self):
        return self.name


def theta(i: int, j: int, k: int) -> ParamVar:
    return ParamVar("theta", i, j, k)


def hyper(i: int, j: int, k: int) -> ParamVar:
    return ParamVar("hyper_t", i, j, k)


@dataclass(frozen=True)
class Monomial:
    coef: float
    vars: tuple[ParamVar, ...] = ()

    def __post_init__(self):
        if len(set(self.vars)) != len(self.vars):
            raise ValueError(f"monomial repeats a variable: {self.vars}")
        if not math.isfinite(self.coef):
            raise ValueError("monomial coefficient must be finite")

    @property
    def degree(self) -> int:
        return len(self.vars)

    def value(self, point: Mapping[ParamVar, float]) -> float:
        out = self.coef
        for v in self.vars:
            out *= point[v]
        return out

    def __str__(self):
        if not self.vars:
            return f"{self.coef:.12g}"
        body = "*".join(v.name for v in self.vars)
        if self.coef == 1.0:
            return body
        if self.coef == -1.0:
            return f"-{body}"
        return f"{self.coef:.12g}*{body}"


Atom = Union[float, ParamVar]


def polynomial(terms: Iterable[tuple[float, Iterable[Atom]]]) -> list[Monomial]:
    """Collect ``coef * prod(atoms)`` terms into canonical monomials.

    Float atoms fold into the coefficient; like terms merge and zero terms
    drop out.  Degree-0 terms are kept (callers move them to the constant).
    """
    acc: dict[tuple[ParamVar, ...], float] = {}
    for coef, atoms in terms:
        c = float(coef)
        vs = []
        for a in atoms:
            if isinstance(a, ParamVar):
                vs.append(a)
            else:
                c *= float(a)
        if c == 0.0:
            continue
        key = tuple(sorted(vs))
        acc[key] = acc.get(key, 0.0) + c
    return [Monomial(c, key) for key, c in acc.items() if c != 0.0]


@dataclass(frozen=True)
class MultilinearConstraint:
    """``sum(terms) <cmp> rhs``.  ``defines`` names the variable this equality
    determines from the others (message, auxiliary or linked parameter)."""

    terms: tuple[Monomial, ...]
    cmp: str
    rhs: float
    tag: str = ""
    defines: ParamVar | None = None

    def __post_init__(self):
        if self.cmp not in COMPARATORS:
            raise ValueError(f"unknown comparator {self.cmp!r}")
        if not math.isfinite(self.rhs):
            raise ValueError("constraint right-hand side must be finite")
        if self.defines is not None and self.cmp != "=":
            raise ValueError("only equalities define variables")

    @classmethod
    def build(cls, terms: Iterable[tuple[float, Iterable[Atom]]], cmp: str, rhs: float = 0.0,
              tag: str = "", defines: ParamVar | None = None) -> MultilinearConstraint:
        """Canonicalize terms, moving constant monomials to the right-hand side."""
        monos, const = [], 0.0
        for m in polynomial(terms):
            if m.vars:
                monos.append(m)
            else:
                const += m.coef
        return cls(tuple(monos), cmp, float(rhs) - const, tag, defines)

    @property
    def variables(self) -> set[ParamVar]:
        return {v for m in self.terms for v in m.vars}

    @property
    def degree(self) -> int:
        return max((m.degree for m in self.terms), default=0)

    def lhs(self, point: Mapping[ParamVar, float]) -> float:
        return sum(m.value(point) for m in self.terms)

    def violation(self, point: Mapping[ParamVar, float]) -> float:
        d = self.lhs(point) - self.rhs
        if self.cmp == "<=":
            return max(d, 0.0)
        if self.cmp == ">=":
            return max(-d, 0.0)
        return abs(d)

    def is_trivial(self) -> bool:
        """True for a variable-free constraint that holds."""
        return not self.terms and self.violation({}) <= 1e-12

    def __str__(self):
        lhs = " + ".join(str(m) for m in self.terms) or "0"
        lhs = lhs.replace("+ -", "- ")
        tag = f"  # {self.tag}" if self.tag else ""
        return f"{lhs} {self.cmp} {self.rhs + 0.0:.12g}{tag}"


@dataclass
class ConstraintSet:
    boxes: dict[ParamVar, tuple[float, float]] = field(default_factory=dict)
    constraints: list[MultilinearConstraint] = field(default_factory=list)

    def declare(self, var: ParamVar, lo: float = 0.0, hi: float = 1.0) -> ParamVar:
        """Declare ``var`` or intersect its existing box with ``[lo, hi]``."""
        if var in self.boxes:
            olo, ohi = self.boxes[var]
            lo, hi = max(lo, olo), min(hi, ohi)
        self.boxes[var] = (float(lo), float(hi))
        return var

    def add(self, c: MultilinearConstraint) -> None:
        if c.is_trivial():
            return
        self.constraints.append(c)

    def extend(self, other: ConstraintSet) -> None:
        for v, (lo, hi) in other.boxes.items():
            self.declare(v, lo, hi)
        seen = set(self.constraints)
        for c in other.constraints:
            if c not in seen:
                self.add(c)
                seen.add(c)

    def copy(self) -> ConstraintSet:
        return ConstraintSet(dict(self.boxes), list(self.constraints))

    @property
    def variables(self) -> list[ParamVar]:
        return sorted(self.boxes)

    def undeclared(self) -> set[ParamVar]:
        used = set()
        for c in self.constraints:
            used |= c.variables
        return used - set(self.boxes)

    def check(self) -> None:
        missing = self.undeclared()
        if missing:
            raise NetworkError("constraints reference undeclared variables: "
                               + ", ".join(sorted(v.name for v in missing)))
        for v, (lo, hi) in self.boxes.items():
            if lo > hi + 1e-12:
                raise NetworkError(f"empty box for {v.name}: [{lo}, {hi}]")

    def max_violation(self, point: Mapping[ParamVar, float]) -> float:
        worst = 0.0
        for v, (lo, hi) in self.boxes.items():
            if v in point:
                worst = max(worst, lo - point[v], point[v] - hi)
        for c in self.constraints:
            worst = max(worst, c.violation(point))
        return worst

    def is_feasible(self, point: Mapping[ParamVar, float], tol: float = 1e-9) -> bool:
        return self.max_violation(point) <= tol


# ---------------------------------------------------------------------------
# Compilation of network content
# ---------------------------------------------------------------------------

def _row_atoms(net: Network, spec: NodeSpec, k: int) -> list[Atom]:
    """CPT entries of row ``k``: constants for numeric rows, θ otherwise."""
    i = net.index(spec.name)
    if k in spec.numeric_rows:
        return list(spec.numeric_rows[k])
    return [theta(i, j, k) for j in range(net.card(spec.name))]


def relation_atom(net: Network, spec: NodeSpec, j: int, k: int) -> Atom:
    """The quantity a relation constrains at entry ``(j, k)``.

    For IDM rows this is the location hyperparameter t; numeric rows of an
    IDM node contribute their prior mean.
    """
    i = net.index(spec.name)
    if spec.idm is not None:
        if k in spec.idm.counts:
            return hyper(i, j, k)
        if k in spec.tau:
            return spec.tau[k][j]
    if k in spec.numeric_rows:
        return spec.numeric_rows[k][j]
    return theta(i, j, k)


def _contexts(net: Network, spec: NodeSpec, fixed: Iterable[str]):
    """All instantiations of the parents outside ``fixed``."""
    others = [p for p in spec.parents if p not in set(fixed)]
    sizes = [net.card(p) for p in others]
    total = 1
    for s in sizes:
        total *= s
    for flat in range(total):
        assign, rem = {}, flat
        for p, s in zip(reversed(others), reversed(sizes)):
            assign[p] = rem % s
            rem //= s
        yield assign


def _emit_signed(cs: ConstraintSet, terms, sign: str, tag: str, lower: float = 0.0) -> None:
    if sign == "?":
        return
    cmp = {"+": ">=", "-": "<=", "0": "="}[sign]
    rhs = {"+": lower, "-": -lower, "0": 0.0}[sign]
    _add_checked(cs, MultilinearConstraint.build(terms, cmp, rhs, tag))


def _add_checked(cs: ConstraintSet, c: MultilinearConstraint) -> None:
    # A violated constant constraint is kept so downstream solvers report infeasibility.
    if not c.terms and not c.is_trivial():
        cs.constraints.append(c)
    else:
        cs.add(c)


def relation_constraints(net: Network, spec: NodeSpec, rel: QualitativeRelation,
                         atom=relation_atom) -> ConstraintSet:
    """Constraints of one relation, one per applicable parent context."""
    cs = ConstraintSet()
    owner = spec.name
    if net.card(owner) != 2 or any(net.card(s) != 2 for s in rel.sources):
        raise NetworkError(f"{rel.describe(owner)}: qualitative relation on non-binary variable")
    tag = rel.describe(owner)

    def entry(j: int, assign: Mapping[str, int]) -> Atom:
        a = atom(net, spec, j, net.config_index(owner, assign))
        if isinstance(a, ParamVar):
            cs.declare(a)
        return a

    if rel.kind in (RelationKind.INFLUENCE, RelationKind.SITUATIONAL,
                    RelationKind.WEAK, RelationKind.STRONG):
        (src,) = rel.sources
        ctxs = [dict(rel.context)] if rel.kind is RelationKind.SITUATIONAL \
            else list(_contexts(net, spec, [src]))
        for ctx in ctxs:
            hi_ = entry(0, {**ctx, src: 0})
            lo_ = entry(0, {**ctx, src: 1})
            diff = [(1.0, [hi_]), (-1.0, [lo_])]
            if rel.kind is RelationKind.WEAK:
                _emit_signed(cs, diff, rel.sign, tag)
                bound_cmp = "<=" if rel.sign == "+" else ">="
                bound = rel.delta if rel.sign == "+" else -rel.delta
                _add_checked(cs, MultilinearConstraint.build(diff, bound_cmp, bound, tag))
            elif rel.kind is RelationKind.STRONG:
                _emit_signed(cs, diff, rel.sign, tag, lower=rel.delta)
            else:
                _emit_signed(cs, diff, rel.sign, tag)
    else:
        a, b = rel.sources
        c = rel.target if rel.kind is RelationKind.PRODUCT_SYNERGY else 0
        for ctx in _contexts(net, spec, [a, b]):
            ab = entry(c, {**ctx, a: 0, b: 0})
            nanb = entry(c, {**ctx, a: 1, b: 1})
            nab = entry(c, {**ctx, a: 1, b: 0})
            anb = entry(c, {**ctx, a: 0, b: 1})
            if rel.kind is RelationKind.ADDITIVE_SYNERGY:
                terms = [(1.0, [ab]), (1.0, [nanb]), (-1.0, [nab]), (-1.0, [anb])]
            else:
                terms = [(1.0, [ab, nanb]), (-1.0, [anb, nab])]
            _emit_signed(cs, terms, rel.sign, tag)
    return cs


def declare_parameters(net: Network) -> ConstraintSet:
    """θ boxes for every row and normalization for every free row."""
    cs = ConstraintSet()
    for spec in net.nodes:
        i = net.index(spec.name)
        card = net.card(spec.name)
        for k in range(net.n_configs(spec.name)):
            if k in spec.numeric_rows:
                for j, p in enumerate(spec.numeric_rows[k]):
                    cs.declare(theta(i, j, k), p, p)
                continue
            row = [cs.declare(theta(i, j, k)) for j in range(card)]
            cs.add(MultilinearConstraint.build([(1.0, [v]) for v in row], "=", 1.0,
                                               tag="normalization"))
    return cs


def compile_relations(net: Network) -> ConstraintSet:
    """Parameter declarations, normalization rows and every relation constraint."""
    cs = declare_parameters(net)
    for spec in net.nodes:
        for rel in spec.relations:
            cs.extend(relation_constraints(net, spec, rel))
    return cs


def compile_interval_assessments(net: Network) -> ConstraintSet:
    """Box tightening ``lo <= θ_ijk <= hi`` for interval rows (t for IDM rows)."""
    cs = ConstraintSet()
    for spec in net.nodes:
        i = net.index(spec.name)
        for (j, k), (lo, hi) in sorted(spec.interval_rows.items()):
            if lo > hi:
                raise NetworkError(f"node {spec.name!r}: interval ({j}, {k}) has lo > hi")
            is_idm = spec.idm is not None and k in spec.idm.counts
            cs.declare(hyper(i, j, k) if is_idm else theta(i, j, k), lo, hi)
    return cs


def compile_idm_links(net: Network) -> ConstraintSet:
    """``θ = (s t + N)/(s + n)`` for every IDM row, with t on the simplex."""
    cs = ConstraintSet()
    for spec in net.nodes:
        if spec.idm is None:
            continue
        i = net.index(spec.name)
        s = spec.idm.s
        for k, counts in sorted(spec.idm.counts.items()):
            n = float(sum(counts))
            ts = [cs.declare(hyper(i, j, k)) for j in range(len(counts))]
            cs.add(MultilinearConstraint.build([(1.0, [t]) for t in ts], "=", 1.0,
                                               tag="normalization"))
            for j, nj in enumerate(counts):
                th = theta(i, j, k)
                cs.declare(th, nj / (s + n), (s + nj) / (s + n))
                cs.add(MultilinearConstraint.build(
                    [(1.0, [th]), (-s / (s + n), [ts[j]])], "=", nj / (s + n),
                    tag="idm_link", defines=th))
    return cs


def compile_network(net: Network) -> ConstraintSet:
    """Everything the network states about its parameters."""
    cs = compile_relations(net)
    cs.extend(compile_interval_assessments(net))
    cs.extend(compile_idm_links(net))
    return cs


# ---------------------------------------------------------------------------
# Numeric evaluation in index space
# ---------------------------------------------------------------------------

class IndexedConstraints:
    """A constraint list compiled against a fixed variable order, with values
    and analytic Jacobians at numpy points."""

    def __init__(self, constraints: Iterable[MultilinearConstraint], order: list[ParamVar]):
        self.order = order
        index = {v: n for n, v in enumerate(order)}
        self.cmps, self.rhs, self.terms = [], [], []
        for c in constraints:
            self.cmps.append(c.cmp)
            self.rhs.append(c.rhs)
            self.terms.append([(m.coef, [index[v] for v in m.vars]) for m in c.terms])
        self.rhs = np.asarray(self.rhs, dtype=float)

    def __len__(self):
        return len(self.terms)

    def lhs(self, x: np.ndarray) -> np.ndarray:
        out = np.empty(len(self.terms))
        for r, terms in enumerate(self.terms):
            s = 0.0
            for coef, idx in terms:
                p = coef
                for q in idx:
                    p *= x[q]
                s += p
            out[r] = s
        return out

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        J = np.zeros((len(self.terms), len(x)))
        for r, terms in enumerate(self.terms):
            for coef, idx in terms:
                for a in idx:
                    p = coef
                    for q in idx:
                        if q != a:
                            p *= x[q]
                    J[r, a] += p
        return J

    def signed(self) -> np.ndarray:
        """+1 for >=, -1 for <=, 0 for equalities."""
        return np.array([{">=": 1.0, "<=": -1.0, "=": 0.0}[c] for c in self.cmps])
