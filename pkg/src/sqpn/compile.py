"""Symbolic variable elimination into multilinear programs.

Variable elimination runs on the network structure, but each bucket emits
equality constraints ``message = sum of products`` instead of numbers.
Products of more than two variables are chained through auxiliary bilinear
equalities, so every monomial in a compiled program has degree at most two.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .constraints import (
    Atom,
    ConstraintSet,
    Monomial,
    MultilinearConstraint,
    ParamVar,
    compile_network,
    polynomial,
    theta,
)
from .model import (
    EvidenceImpossible,
    LogicAssessment,
    Network,
    NetworkError,
    Query,
)

DEFAULT_MIN_EVIDENCE = 1e-6


class Sign(str, enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    ZERO = "zero"
    AMBIGUOUS = "ambiguous"


def classify_sign(min_value: float, max_value: float, eps: float = 1e-6) -> Sign:
    if abs(min_value) <= eps and abs(max_value) <= eps:
        return Sign.ZERO
    if max_value <= eps and min_value < -eps:
        return Sign.NEGATIVE
    if min_value >= -eps and max_value > eps:
        return Sign.POSITIVE
    return Sign.AMBIGUOUS


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------

@dataclass
class MultilinearProgram:
    constraints: ConstraintSet
    objective: tuple[Monomial, ...]
    sense: str = "min"
    objective_constant: float = 0.0
    handles: dict[str, ParamVar] = field(default_factory=dict)
    buckets: list[Bucket] = field(default_factory=list)
    description: str = ""
    # numerator and denominator monomials with objective == num / den at
    # every feasible point (den > 0); lets the solver bound ratios directly
    fraction: tuple[tuple[Monomial, ...], tuple[Monomial, ...]] | None = None

    def with_sense(self, sense: str) -> MultilinearProgram:
        if sense not in ("min", "max"):
            raise ValueError(f"unknown sense {sense!r}")
        return replace(self, sense=sense)

    def objective_value(self, point: Mapping[ParamVar, float]) -> float:
        return self.objective_constant + sum(m.value(point) for m in self.objective)

    @property
    def variables(self) -> list[ParamVar]:
        return self.constraints.variables

    def check(self) -> None:
        self.constraints.check()
        monos = list(self.objective)
        if self.fraction is not None:
            monos += list(self.fraction[0]) + list(self.fraction[1])
        for m in monos:
            for v in m.vars:
                if v not in self.constraints.boxes:
                    raise NetworkError(f"objective references undeclared {v.name}")


def dump_program(program: MultilinearProgram) -> str:
    """Plain-text listing: boxes, then one constraint per line, then the objective."""
    lines = [f"# {program.description}" if program.description else "# program"]
    for v in program.variables:
        lo, hi = program.constraints.boxes[v]
        lines.append(f"var {v.name} in [{lo:.12g}, {hi:.12g}]")
    for c in program.constraints.constraints:
        lines.append(f"s.t. {c}")
    obj = " + ".join(str(m) for m in program.objective) or "0"
    if program.objective_constant:
        obj += f" + {program.objective_constant:.12g}"
    lines.append(f"{program.sense} {obj.replace('+ -', '- ')}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Program builder
# ---------------------------------------------------------------------------

def _interval_product(boxes: Sequence[tuple[float, float]]) -> tuple[float, float]:
    lo, hi = 1.0, 1.0
    for a, b in boxes:
        cands = (lo * a, lo * b, hi * a, hi * b)
        lo, hi = min(cands), max(cands)
    return lo, hi


class ProgramBuilder:
    """Shared state while compiling one program: the constraint set, fresh
    message/auxiliary counters, and memoized bilinear products."""

    def __init__(self, net: Network, base: ConstraintSet | None = None):
        self.net = net
        self.cs = compile_network(net) if base is None else base.copy()
        self.n_buckets = 0
        self.n_aux = 0
        self._aux_memo: dict[tuple[ParamVar, ParamVar], ParamVar] = {}
        self.buckets: list[Bucket] = []

    def box(self, v: ParamVar) -> tuple[float, float]:
        return self.cs.boxes[v]

    def fixed_value(self, v: ParamVar) -> float | None:
        lo, hi = self.cs.boxes[v]
        return lo if lo == hi else None

    def new_aux(self) -> ParamVar:
        v = ParamVar("auxiliary", self.n_aux)
        self.n_aux += 1
        return v

    def _interval(self, monos: Iterable[Monomial]) -> tuple[float, float]:
        lo = hi = 0.0
        for m in monos:
            a, b = _interval_product([self.box(v) for v in m.vars])
            lo += min(m.coef * a, m.coef * b)
            hi += max(m.coef * a, m.coef * b)
        return lo, hi

    def define(self, var: ParamVar, monos: list[Monomial], tag: str,
               within: tuple[float, float] | None = None) -> ParamVar:
        """Declare ``var = sum(monos)`` with its box from interval arithmetic,
        intersected with ``within`` when the caller knows a valid range."""
        lo, hi = self._interval(monos)
        if within is not None:
            lo, hi = max(lo, within[0]), min(hi, within[1])
        self.cs.declare(var, lo, hi)
        terms = [(1.0, [var])] + [(-m.coef, list(m.vars)) for m in monos]
        self.cs.add(MultilinearConstraint.build(terms, "=", 0.0, tag=tag, defines=var))
        return var

    def reduce(self, coef: float, atoms: Iterable[Atom]) -> Monomial:
        """Fold constants and fixed variables, then chain the remaining
        variables into a monomial of degree <= 2."""
        c = float(coef)
        vs = []
        for a in atoms:
            if isinstance(a, ParamVar):
                fx = self.fixed_value(a)
                if fx is None:
                    vs.append(a)
                else:
                    c *= fx
            else:
                c *= float(a)
        if c == 0.0:
            return Monomial(0.0)
        vs.sort()
        while len(vs) > 2:
            vs = [self.product(vs[0], vs[1])] + vs[2:]
        return Monomial(c, tuple(vs))

    def product(self, u: ParamVar, v: ParamVar) -> ParamVar:
        """Auxiliary ``w = u * v`` (memoized)."""
        key = (u, v) if u <= v else (v, u)
        w = self._aux_memo.get(key)
        if w is None:
            w = self.new_aux()
            lo, hi = _interval_product([self.box(u), self.box(v)])
            self.cs.declare(w, lo, hi)
            self.cs.add(MultilinearConstraint.build(
                [(1.0, [w]), (-1.0, [key[0], key[1]])], "=", 0.0, tag="aux", defines=w))
            self._aux_memo[key] = w
        return w

    def linear_sum(self, pairs: Iterable[tuple[float, Atom]]) -> list[Monomial]:
        return [m for m in polynomial((c, [a]) for c, a in pairs)]


# ---------------------------------------------------------------------------
# Factors and buckets
# ---------------------------------------------------------------------------

@dataclass
class Factor:
    scope: tuple[str, ...]
    table: dict[tuple[int, ...], Atom]
    label: str


@dataclass
class Bucket:
    index: int
    variable: str | None
    factors: list[str]
    scope: tuple[str, ...]
    messages: dict[tuple[int, ...], ParamVar]
    n_constraints: int = 0

    @property
    def n_configs(self) -> int:
        return len(self.messages)


@dataclass
class BucketTree:
    order: list[str]
    buckets: list[Bucket]


def _family_factor(net: Network, name: str, evidence: Mapping[str, int]) -> Factor:
    spec = net.node(name)
    i = net.index(name)
    family = (name,) + spec.parents
    scope = tuple(v for v in family if v not in evidence)
    table = {}
    ranges = [range(net.card(v)) if v not in evidence else [evidence[v]] for v in family]
    for cfg in itertools.product(*ranges):
        j, parent_vals = cfg[0], cfg[1:]
        k = 0
        for p, val in zip(spec.parents, parent_vals):
            k = k * net.card(p) + val
        if k in spec.numeric_rows:
            entry: Atom = spec.numeric_rows[k][j]
        else:
            entry = theta(i, j, k)
        table[tuple(c for v, c in zip(family, cfg) if v not in evidence)] = entry
    return Factor(scope, table, f"P({name}|{','.join(spec.parents)})")


def _relevant(net: Network, keep: Iterable[str], evidence: Mapping[str, int]) -> set[str]:
    return net.ancestors(list(keep) + list(evidence))


def connected_evidence(net: Network, target: str, evidence: Mapping[str, int]) -> dict[str, int]:
    """The part of ``evidence`` that is not marginally independent of ``target``.

    Observed variables outside the target's component of the moralized
    ancestral graph are independent of the target and of the remaining
    evidence jointly, so conditioning on them changes nothing.
    """
    nodes = net.ancestors([target, *evidence])
    adj: dict[str, set[str]] = {n: set() for n in nodes}
    for n in nodes:
        family = [n, *net.node(n).parents]
        for a, c in itertools.combinations(family, 2):
            adj[a].add(c)
            adj[c].add(a)
    seen, todo = {target}, [target]
    while todo:
        for m in adj[todo.pop()] - seen:
            seen.add(m)
            todo.append(m)
    return {n: v for n, v in evidence.items() if n in seen}


def _reduce_query(net: Network, query: Query) -> Query:
    ev = connected_evidence(net, query.target, query.evidence_map)
    return Query.make(query.target, query.value, ev)


def elimination_order(net: Network, keep: Iterable[str],
                      evidence: Mapping[str, int] | None = None) -> list[str]:
    """Min-fill order over the relevant non-kept, unobserved variables.

    Ties go to the lower variable id, so the order is deterministic.
    """
    evidence = dict(evidence or {})
    keep = list(keep)
    relevant = _relevant(net, keep, evidence)
    adj: dict[str, set[str]] = {v: set() for v in relevant if v not in evidence}
    for name in relevant:
        fam = [v for v in (name,) + net.node(name).parents if v not in evidence]
        for a in fam:
            for b in fam:
                if a != b:
                    adj[a].add(b)
    todo = {v for v in adj if v not in set(keep)}
    order = []
    while todo:
        def fill(v):
            nb = sorted(adj[v])
            return sum(1 for a, b in itertools.combinations(nb, 2) if b not in adj[a])
        best = min(todo, key=lambda v: (fill(v), net.index(v)))
        nb = adj[best]
        for a in nb:
            adj[a] |= nb - {a}
            adj[a].discard(best)
        del adj[best]
        todo.remove(best)
        order.append(best)
    return order


def symbolic_ve(net: Network, keep: Sequence[str], evidence: Mapping[str, int] | None = None,
                builder: ProgramBuilder | None = None, drop: Iterable[str] = (),
                override: Mapping[str, Factor] | None = None):
    """Messages defining ``P(keep, evidence)`` for every configuration of ``keep``.

    Returns ``(messages, constraint_set, bucket_tree)``; ``messages`` maps a
    value tuple (ordered as ``keep``) to the message variable holding that
    joint probability.  With a shared ``builder`` the constraints accumulate
    into ``builder.cs``.  Families of the nodes in ``drop`` are left out,
    which for observed roots turns the joint into the conditional.
    ``override`` replaces the family factors of the nodes it names.
    """
    evidence = dict(evidence or {})
    keep = list(keep)
    if set(keep) & set(evidence):
        raise NetworkError("kept variables must not be observed")
    b = builder or ProgramBuilder(net)
    relevant = _relevant(net, keep, evidence)
    drop = set(drop)
    override = override or {}
    factors = [override[n] if n in override else _family_factor(net, n, evidence)
               for n in net.topological_order if n in relevant and n not in drop]
    order = elimination_order(net, keep, evidence)
    tree_buckets = []

    for var in order:
        bucket = [f for f in factors if var in f.scope]
        factors = [f for f in factors if var not in f.scope]
        scope = tuple(sorted({v for f in bucket for v in f.scope} - {var}, key=net.index))
        factors.append(_emit_bucket(b, net, var, bucket, scope, tree_buckets))

    scope = tuple(keep)
    final = _emit_bucket(b, net, None, factors, scope, tree_buckets)
    messages = {cfg: atom for cfg, atom in final.table.items()}
    if set(evidence) <= drop:
        # the remaining families form a distribution over the unobserved variables
        monos = [Monomial(1.0, (m,)) if isinstance(m, ParamVar) else Monomial(float(m), ())
                 for m in messages.values()]
        terms = [(m.coef, m.vars) for m in monos if m.vars]
        const = sum(m.coef for m in monos if not m.vars)
        if terms:
            b.cs.add(MultilinearConstraint.build(terms, "=", 1.0 - const,
                                                 tag="total probability"))
    return messages, b.cs, BucketTree(order, tree_buckets)


def _emit_bucket(b: ProgramBuilder, net: Network, var: str | None, bucket: list[Factor],
                 scope: tuple[str, ...], tree: list[Bucket]) -> Factor:
    index = b.n_buckets
    b.n_buckets += 1
    before = len(b.cs.constraints)
    table: dict[tuple[int, ...], Atom] = {}
    elim = range(net.card(var)) if var is not None else [None]
    for c_index, cfg in enumerate(itertools.product(*(range(net.card(v)) for v in scope))):
        assign = dict(zip(scope, cfg))
        monos = []
        for x in elim:
            if var is not None:
                assign[var] = x
            atoms = [f.table[tuple(assign[v] for v in f.scope)] for f in bucket]
            m = b.reduce(1.0, atoms)
            if m.coef != 0.0:
                monos.append(m)
        monos = polynomial((m.coef, m.vars) for m in monos)
        msg = ParamVar("message", index, c_index)
        b.define(msg, monos, tag=f"bucket {index}" + (f" ({var})" if var else " (final)"))
        table[cfg] = msg
    rec = Bucket(index, var, [f.label for f in bucket], scope, dict(table),
                 n_constraints=len(b.cs.constraints) - before)
    tree.append(rec)
    b.buckets.append(rec)
    return Factor(scope, table, f"m{index}")


# ---------------------------------------------------------------------------
# Queries
# ---------------------------------------------------------------------------

def _start(net: Network, extra: ConstraintSet | None) -> ProgramBuilder:
    b = ProgramBuilder(net)
    if extra is not None:
        b.cs.extend(extra)
    for la in net.logic_assessments:
        compile_logic_assessment(net, la, builder=b)
    return b


def _check_query(net: Network, query: Query) -> None:
    net.var(query.target)
    if not 0 <= query.value < net.card(query.target):
        raise NetworkError(f"value {query.value} out of range for {query.target!r}")
    for name, val in query.evidence:
        if name == query.target:
            raise NetworkError("the query variable cannot be observed")
        if not 0 <= val < net.card(name):
            raise NetworkError(f"evidence value {val} out of range for {name!r}")


def _joint(b: ProgramBuilder, net: Network, query: Query):
    ev = query.evidence_map
    keep = [query.target] + sorted(ev, key=net.index)
    messages, _, _ = symbolic_ve(net, keep, {}, builder=b)
    e_cfg = tuple(ev[n] for n in keep[1:])
    joint_qe = {q: messages[(q,) + e_cfg] for q in range(net.card(query.target))}
    marg_q = [messages[cfg] for cfg in messages if cfg[0] == query.value]
    return joint_qe, marg_q


def _conditional(b: ProgramBuilder, joint_qe: dict[int, ParamVar], q: int,
                 min_evidence: float) -> tuple[ParamVar, ParamVar]:
    """Introduce ``pe = P(e)`` and ``r`` with ``r * pe = P(q, e)``."""
    pe = b.new_aux()
    b.define(pe, b.linear_sum((1.0, m) for m in joint_qe.values()), tag="evidence P(e)")
    lo, hi = b.box(pe)
    if hi <= 0.0:
        raise EvidenceImpossible("the evidence has probability zero in every completion")
    if lo <= 0.0:
        eps = min(min_evidence, hi / 2)
        b.cs.declare(pe, eps, hi)
        b.cs.add(MultilinearConstraint.build([(1.0, [pe])], ">=", eps, tag="evidence positive"))
        lo = eps
    pqe = joint_qe[q]
    qlo, qhi = b.box(pqe)
    r = b.new_aux()
    b.cs.declare(r, max(0.0, qlo / hi), min(1.0, qhi / lo))
    b.cs.add(MultilinearConstraint.build([(1.0, [r, pe]), (-1.0, [pqe])], "=", 0.0,
                                         tag="conditional r*P(e)=P(q,e)", defines=r))
    return r, pe


def _scalable(b: ProgramBuilder, net: Network, query: Query) -> bool:
    """One observed non-root variable whose evidence column has a free entry."""
    if len(query.evidence) != 1:
        return False
    (name, e), = query.evidence
    if not net.node(name).parents:
        return False
    i = net.index(name)
    return any(b.fixed_value(theta(i, e, k)) is None for k in range(net.n_configs(name)))


def _homogeneous_cuts(b: ProgramBuilder, net: Network, i: int, e: int,
                      mus: Sequence[ParamVar]) -> None:
    """Restate scale-free constraints of node ``i`` over the normalized column.

    A constraint that, written in the column ``theta(e|.)`` alone, is a form
    of a single degree with zero right-hand side keeps its sense after
    dividing by a power of the column sum.
    """
    if net.card(net.names[i]) != 2:
        return
    for c in list(b.cs.constraints):
        if c.tag in ("normalization",) or not c.variables:
            continue
        if any(v.role != "theta" or v.i != i for v in c.variables):
            continue
        poly: dict[tuple[int, ...], float] = {}
        for m in c.terms:
            # theta(1-e|k) = 1 - theta(e|k)
            options = [[(1.0, (v.k,))] if v.j == e else [(1.0, ()), (-1.0, (v.k,))]
                       for v in m.vars]
            for choice in itertools.product(*options):
                coef = m.coef
                ks: list[int] = []
                for f, part in choice:
                    coef *= f
                    ks.extend(part)
                key = tuple(sorted(ks))
                poly[key] = poly.get(key, 0.0) + coef
        const = poly.pop((), 0.0)
        poly = {k: v for k, v in poly.items() if abs(v) > 1e-15}
        degrees = {len(k) for k in poly}
        if abs(const - c.rhs) > 1e-15 or len(degrees) != 1:
            continue
        if any(len(set(k)) != len(k) for k in poly):
            continue
        terms = [(coef, [mus[k] for k in ks]) for ks, coef in sorted(poly.items())]
        b.cs.add(MultilinearConstraint.build(terms, c.cmp, 0.0, tag=f"scaled {c.tag}"))


def _scaled_conditional(b: ProgramBuilder, net: Network, query: Query,
                        min_evidence: float):
    """``P(q|e)`` for one observed non-root ``E`` over ``mu_k = theta(e|k) / s``.

    ``P(q, e)`` and ``P(e)`` are linear in the column ``theta(e|.)``, so its
    sum ``s`` cancels from the ratio.  Over ``mu`` the ratio ``N / D`` stays
    determined when the whole column shrinks, where ``P(q, e) / P(e)`` tends
    to 0/0.  Returns ``(r, D, N)`` with ``r * D = N`` and ``P(e) = s * D``.
    """
    (name, e), = query.evidence
    i, K = net.index(name), net.n_configs(name)
    col = [theta(i, e, k) for k in range(K)]
    boxes = [b.box(v) for v in col]
    if sum(hi for _, hi in boxes) <= 0.0:
        raise EvidenceImpossible("the evidence has probability zero in every completion")
    s = b.define(b.new_aux(), b.linear_sum((1.0, v) for v in col), tag="likelihood scale")
    mus = []
    for k, v in enumerate(col):
        lo, hi = boxes[k]
        rest_lo = sum(x[0] for n, x in enumerate(boxes) if n != k)
        rest_hi = sum(x[1] for n, x in enumerate(boxes) if n != k)
        mu = b.new_aux()
        b.cs.declare(mu, lo / (lo + rest_hi) if lo > 0 else 0.0,
                     hi / (hi + rest_lo) if hi + rest_lo > 0 else 1.0)
        b.cs.add(MultilinearConstraint.build([(1.0, [v]), (-1.0, [s, mu])], "=", 0.0,
                                             tag="scaled likelihood"))
        mus.append(mu)
    b.cs.add(MultilinearConstraint.build([(1.0, [m]) for m in mus], "=", 1.0,
                                         tag="likelihood normalization"))
    _homogeneous_cuts(b, net, i, e, mus)

    base = _family_factor(net, name, {name: e})
    spec = net.node(name)
    table = {}
    for cfg in base.table:
        k = 0
        for p, val in zip(spec.parents, cfg):
            k = k * net.card(p) + val
        table[cfg] = mus[k]
    factor = Factor(base.scope, table, base.label + " (normalized)")
    msgs, _, _ = symbolic_ve(net, [query.target], {name: e}, builder=b,
                             override={name: factor})
    num = msgs[(query.value,)]
    den = b.define(b.new_aux(), b.linear_sum((1.0, m) for m in msgs.values()),
                   tag="normalized evidence")
    # P(e) = s * D >= min_evidence
    pe = b.product(s, den)
    lo, hi = b.box(pe)
    if hi <= 0.0:
        raise EvidenceImpossible("the evidence has probability zero in every completion")
    if lo < min_evidence:
        eps = min(min_evidence, hi / 2)
        b.cs.add(MultilinearConstraint.build([(1.0, [pe])], ">=", eps, tag="evidence positive"))
        b.cs.declare(pe, eps, hi)
        s_hi, d_hi = b.box(s)[1], b.box(den)[1]
        b.cs.declare(s, max(b.box(s)[0], eps / d_hi), s_hi)
        b.cs.declare(den, max(b.box(den)[0], eps / s_hi), d_hi)
    dlo, dhi = b.box(den)
    nlo, nhi = b.box(num)
    r = b.new_aux()
    b.cs.declare(r, max(0.0, nlo / dhi), min(1.0, nhi / dlo))
    b.cs.add(MultilinearConstraint.build([(1.0, [r, den]), (-1.0, [num])], "=", 0.0,
                                         tag="conditional r*D=N", defines=r))
    return r, den, num, pe


def _root_evidence(net: Network, query: Query) -> bool:
    return bool(query.evidence) and all(not net.node(n).parents for n, _ in query.evidence)


def _clamped_conditional(b: ProgramBuilder, net: Network, query: Query,
                         check: bool = True) -> Atom:
    """``P(q|e)`` when every observed variable is a root: eliminate with the
    evidence clamped and the observed priors removed, so no division is
    needed."""
    for name, val in query.evidence if check else ():
        if b.box(theta(net.index(name), val, 0))[1] <= 0.0:
            raise EvidenceImpossible(f"P({name}={net.var(name).values[val]}) is zero "
                                     "in every completion")
    ev = query.evidence_map
    msgs, _, _ = symbolic_ve(net, [query.target], ev, builder=b, drop=ev)
    return msgs[(query.value,)]


def pose_influence_query(net: Network, query: Query, *, extra: ConstraintSet | None = None,
                         min_evidence: float = DEFAULT_MIN_EVIDENCE) -> MultilinearProgram:
    """Program whose min and max objective bound ``P(q|e) - P(q)``.

    Conditioning multiplies through by ``P(e)``; completions with
    ``P(e) < min_evidence`` are excluded when ``P(e)`` can vanish.  When
    every observed variable is a root the conditional is eliminated directly
    with the evidence clamped.
    """
    _check_query(net, query)
    if not query.evidence:
        raise NetworkError("an influence query needs evidence")
    full, query = query, _reduce_query(net, query)
    b = _start(net, extra)
    fraction = None
    if not query.evidence:
        # evidence independent of the target: the influence vanishes identically
        prog = MultilinearProgram(b.cs, (), "min", handles={}, buckets=b.buckets,
                                  description=f"influence of {_ev_text(net, full)} on "
                                              f"{_q_text(net, full)} (independent)")
        prog.check()
        return prog
    if _root_evidence(net, query):
        # P(q|e) - P(q) = sum_{e' != e} P(e') (P(q|e) - P(q|e')) with every
        # conditional clamped; each difference gets its own variable so bound
        # tightening can establish its sign.  Variables must stay nonnegative,
        # so the variable holds 1 + P(q|e) - P(q|e') and the prior is
        # subtracted back.
        names = [n for n, _ in query.evidence]
        r = _clamped_conditional(b, net, query)
        terms = []
        for cfg in itertools.product(*(range(net.card(n)) for n in names)):
            alt = Query.make(query.target, query.value, dict(zip(names, cfg)))
            if alt == query:
                continue
            c = _clamped_conditional(b, net, alt, check=False)
            d = b.define(b.new_aux(), b.linear_sum([(1.0, 1.0), (1.0, r), (-1.0, c)]),
                         tag="shifted conditional difference", within=(0.0, 2.0))
            # the prior product P(e') is formed first so that it multiplies d
            # as a single factor
            pm = b.reduce(1.0, [theta(net.index(n), v, 0) for n, v in zip(names, cfg)])
            if pm.coef == 0.0:
                continue
            prior = list(pm.vars) if len(pm.vars) < 2 else [b.product(*pm.vars)]
            terms += [(pm.coef, prior + [d]), (-pm.coef, prior)]
        objective = polynomial(terms)
        handles = {"r": r}
    elif _scalable(b, net, query):
        r, den, num, pe = _scaled_conditional(b, net, query, min_evidence)
        msgs, _, _ = symbolic_ve(net, [query.target], {}, builder=b)
        pq = msgs[(query.value,)]
        # "pe" is the denominator of the fraction; "evidence" is P(e) itself
        handles = {"r": r, "pe": den, "pqe": num, "pq": pq, "evidence": pe}
        fraction = ((Monomial(1.0, (num,)), Monomial(-1.0, tuple(sorted((pq, den))))),
                    (Monomial(1.0, (den,)),))
        objective = polynomial([(1.0, [r]), (-1.0, [pq])])
    else:
        joint_qe, marg_q = _joint(b, net, query)
        r, pe = _conditional(b, joint_qe, query.value, min_evidence)
        pq = b.new_aux()
        b.define(pq, b.linear_sum((1.0, m) for m in marg_q), tag="marginal P(q)")
        marg_q = [pq]
        handles = {"r": r, "pe": pe, "pqe": joint_qe[query.value], "pq": pq}
        # P(q|e) - P(q) = (P(q,e) - P(q) P(e)) / P(e)
        fraction = ((Monomial(1.0, (joint_qe[query.value],)),
                     Monomial(-1.0, tuple(sorted((pq, pe))))),
                    (Monomial(1.0, (pe,)),))
        objective = polynomial([(1.0, [r]), (-1.0, [pq])])
    prog = MultilinearProgram(b.cs, tuple(objective), "min", handles=handles,
                              buckets=b.buckets, fraction=fraction,
                              description=f"influence of {_ev_text(net, query)} on "
                                          f"{_q_text(net, query)}")
    prog.check()
    return prog


def pose_marginal_query(net: Network, query: Query, *, extra: ConstraintSet | None = None,
                        min_evidence: float = DEFAULT_MIN_EVIDENCE) -> MultilinearProgram:
    """Program for ``P(q)`` or, with evidence, ``P(q|e)``."""
    _check_query(net, query)
    query = _reduce_query(net, query)
    b = _start(net, extra)
    fraction = None
    if query.evidence and _root_evidence(net, query):
        r = _clamped_conditional(b, net, query)
        objective = (Monomial(1.0, (r,)),)
        handles = {"r": r}
        desc = f"P({_q_text(net, query)} | {_ev_text(net, query)})"
    elif query.evidence and _scalable(b, net, query):
        r, den, num, pe = _scaled_conditional(b, net, query, min_evidence)
        objective = (Monomial(1.0, (r,)),)
        handles = {"r": r, "pe": den, "pqe": num, "evidence": pe}
        fraction = ((Monomial(1.0, (num,)),), (Monomial(1.0, (den,)),))
        desc = f"P({_q_text(net, query)} | {_ev_text(net, query)})"
    elif query.evidence:
        joint_qe, _ = _joint(b, net, query)
        r, pe = _conditional(b, joint_qe, query.value, min_evidence)
        objective = (Monomial(1.0, (r,)),)
        handles = {"r": r, "pe": pe, "pqe": joint_qe[query.value]}
        fraction = ((Monomial(1.0, (joint_qe[query.value],)),), (Monomial(1.0, (pe,)),))
        desc = f"P({_q_text(net, query)} | {_ev_text(net, query)})"
    else:
        _, marg_q = _joint(b, net, query)
        objective = tuple(polynomial((1.0, [m]) for m in marg_q))
        handles = {"pq": marg_q[0]}
        desc = f"P({_q_text(net, query)})"
    prog = MultilinearProgram(b.cs, objective, "min", handles=handles, buckets=b.buckets,
                              description=desc, fraction=fraction)
    prog.check()
    return prog


def _q_text(net, query):
    return f"{query.target}={net.var(query.target).values[query.value]}"


def _ev_text(net, query):
    return ",".join(f"{n}={net.var(n).values[v]}" for n, v in query.evidence)


# ---------------------------------------------------------------------------
# Probabilistic-logic assessments
# ---------------------------------------------------------------------------

def compile_logic_assessment(net: Network, assessment: LogicAssessment,
                             builder: ProgramBuilder | None = None) -> ConstraintSet:
    """``sum_{s |= formula} P(s, c) = alpha * P(c)``, multiplied through.

    Returns the constraints this assessment adds; tautologies with
    ``alpha = 1`` (and contradictions with ``alpha = 0``) add nothing.
    """
    atoms = assessment.formula.atoms()
    cond = dict(assessment.condition)
    for a in atoms:
        if net.card(a) != 2:
            raise NetworkError(f"atom {a!r} is not binary")
    keep = list(dict.fromkeys(sorted(atoms, key=net.index)
                              + sorted(cond, key=net.index)))
    coefs = {}
    alpha = float(assessment.alpha)
    for cfg in itertools.product(*(range(net.card(v)) for v in keep)):
        assign = dict(zip(keep, cfg))
        if any(assign[n] != v for n, v in cond.items()):
            continue
        sat = assessment.formula.evaluate({a: assign[a] == 0 for a in atoms})
        c = (1.0 - alpha) if sat else -alpha
        if c != 0.0:
            coefs[cfg] = c
    if not coefs:
        return ConstraintSet()
    b = builder or ProgramBuilder(net)
    before_boxes = set(b.cs.boxes)
    before = len(b.cs.constraints)
    messages, _, _ = symbolic_ve(net, keep, {}, builder=b)
    b.cs.add(MultilinearConstraint.build([(c, [messages[cfg]]) for cfg, c in coefs.items()],
                                         "=", 0.0, tag=f"logic P({assessment.text or assessment.formula})"
                                                       f"={alpha:g}"))
    added = ConstraintSet({v: b.cs.boxes[v] for v in b.cs.boxes if v not in before_boxes},
                          b.cs.constraints[before:])
    return added
