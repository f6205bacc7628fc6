"""Semi-qualitative probabilistic networks: variables, node specifications,
qualitative relations, queries, Boolean formulas and the EMAJSAT gadget.

Value index 0 of a binary variable is its "higher" value.  Every sign in a
qualitative relation is read against that convention.
"""

from __future__ import annotations

import enum
import itertools
import re
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Mapping, Sequence


class NetworkError(ValueError):
    """Raised when a network is malformed or an operation is inapplicable."""


class EvidenceImpossible(NetworkError):
    """Raised when the observed event provably has probability zero."""


# ---------------------------------------------------------------------------
# Qualitative relations
# ---------------------------------------------------------------------------

SIGNS = ("+", "-", "0", "?")


class RelationKind(str, enum.Enum):
    INFLUENCE = "influence"
    ADDITIVE_SYNERGY = "additive_synergy"
    PRODUCT_SYNERGY = "product_synergy"
    SITUATIONAL = "situational"
    WEAK = "weak"
    STRONG = "strong"


@dataclass(frozen=True)
class QualitativeRelation:
    """A qualitative statement attached to the node that owns it.

    ``sources`` holds one parent name for influences and two for synergies.
    ``context`` is the full instantiation of the remaining parents for a
    situational sign, as ``(name, value index)`` pairs.  ``target`` is the
    value ``c`` of a product synergy.
    """

    kind: RelationKind
    sign: str
    sources: tuple[str, ...]
    delta: float | None = None
    context: tuple[tuple[str, int], ...] = ()
    target: int = 0

    @classmethod
    def influence(cls, source: str, sign: str) -> QualitativeRelation:
        return cls(RelationKind.INFLUENCE, sign, (source,))

    @classmethod
    def additive_synergy(cls, a: str, b: str, sign: str) -> QualitativeRelation:
        return cls(RelationKind.ADDITIVE_SYNERGY, sign, (a, b))

    @classmethod
    def product_synergy(cls, a: str, b: str, sign: str, target: int = 0) -> QualitativeRelation:
        return cls(RelationKind.PRODUCT_SYNERGY, sign, (a, b), target=target)

    @classmethod
    def situational(cls, source: str, sign: str,
                    context: Mapping[str, int]) -> QualitativeRelation:
        return cls(RelationKind.SITUATIONAL, sign, (source,),
                   context=tuple(sorted(context.items())))

    @classmethod
    def weak(cls, source: str, sign: str, delta: float) -> QualitativeRelation:
        return cls(RelationKind.WEAK, sign, (source,), delta=float(delta))

    @classmethod
    def strong(cls, source: str, sign: str, delta: float) -> QualitativeRelation:
        return cls(RelationKind.STRONG, sign, (source,), delta=float(delta))

    def describe(self, owner: str) -> str:
        src = ",".join(self.sources)
        if self.kind is RelationKind.INFLUENCE:
            return f"S{self.sign}({src},{owner})"
        if self.kind is RelationKind.ADDITIVE_SYNERGY:
            return f"Y{self.sign}({{{src}}},{owner})"
        if self.kind is RelationKind.PRODUCT_SYNERGY:
            return f"X{self.sign}({{{src}}},{owner}={self.target})"
        if self.kind is RelationKind.SITUATIONAL:
            ctx = ",".join(f"{n}={v}" for n, v in self.context)
            return f"S{self.sign}[{ctx}]({src},{owner})"
        return f"{self.kind.value}{self.sign}[{self.delta:g}]({src},{owner})"


# ---------------------------------------------------------------------------
# Boolean formulas
# ---------------------------------------------------------------------------

class BooleanFormula:
    """Expression tree over propositional atoms (``Atom``, ``Not``, ``And``, ``Or``)."""

    def evaluate(self, assignment: Mapping[str, bool]) -> bool:
        raise NotImplementedError

    def atoms(self) -> list[str]:
        """Atom names in order of first appearance."""
        seen: dict[str, None] = {}
        for node in self.walk():
            if isinstance(node, Atom):
                seen.setdefault(node.name, None)
        return list(seen)

    def walk(self) -> Iterator[BooleanFormula]:
        """Post-order traversal."""
        for child in self.children:
            yield from child.walk()
        yield self

    @property
    def children(self) -> tuple[BooleanFormula, ...]:
        return ()


@dataclass(frozen=True)
class Atom(BooleanFormula):
    name: str

    def evaluate(self, assignment):
        return bool(assignment[self.name])

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class Not(BooleanFormula):
    arg: BooleanFormula

    def evaluate(self, assignment):
        return not self.arg.evaluate(assignment)

    @property
    def children(self):
        return (self.arg,)

    def __str__(self):
        return f"!{_wrap(self.arg)}"


@dataclass(frozen=True)
class And(BooleanFormula):
    left: BooleanFormula
    right: BooleanFormula

    def evaluate(self, assignment):
        return self.left.evaluate(assignment) and self.right.evaluate(assignment)

    @property
    def children(self):
        return (self.left, self.right)

    def __str__(self):
        return f"({self.left} & {self.right})"


@dataclass(frozen=True)
class Or(BooleanFormula):
    left: BooleanFormula
    right: BooleanFormula

    def evaluate(self, assignment):
        return self.left.evaluate(assignment) or self.right.evaluate(assignment)

    @property
    def children(self):
        return (self.left, self.right)

    def __str__(self):
        return f"({self.left} | {self.right})"


def _wrap(f: BooleanFormula) -> str:
    return str(f) if isinstance(f, (Atom, And, Or)) else f"({f})"


_TOKEN = re.compile(r"\s*(?:([A-Za-z_][A-Za-z0-9_]*)|(.))")


def parse_formula(text: str) -> BooleanFormula:
    """Parse identifiers, ``&``, ``|``, ``!`` and parentheses.

    ``!`` binds tightest, then ``&``, then ``|``; binary operators are
    left-associative.
    """
    tokens = []
    for ident, sym in _TOKEN.findall(text):
        if ident:
            tokens.append(ident)
        elif sym.strip():
            if sym not in "&|!()":
                raise ValueError(f"unexpected character {sym!r} in formula {text!r}")
            tokens.append(sym)
    pos = 0

    def peek():
        return tokens[pos] if pos < len(tokens) else None

    def take(expected=None):
        nonlocal pos
        tok = peek()
        if tok is None or (expected is not None and tok != expected):
            raise ValueError(f"formula {text!r}: expected {expected or 'operand'}, got {tok!r}")
        pos += 1
        return tok

    def disjunction():
        node = conjunction()
        while peek() == "|":
            take("|")
            node = Or(node, conjunction())
        return node

    def conjunction():
        node = unary()
        while peek() == "&":
            take("&")
            node = And(node, unary())
        return node

    def unary():
        tok = peek()
        if tok == "!":
            take("!")
            return Not(unary())
        if tok == "(":
            take("(")
            node = disjunction()
            take(")")
            return node
        tok = take()
        if tok in "&|!()":
            raise ValueError(f"formula {text!r}: unexpected {tok!r}")
        return Atom(tok)

    if not tokens:
        raise ValueError("empty formula")
    result = disjunction()
    if pos != len(tokens):
        raise ValueError(f"formula {text!r}: trailing tokens from {tokens[pos]!r}")
    return result


def natural_key(name: str):
    return [int(p) if p.isdigit() else p for p in re.split(r"(\d+)", name)]


# ---------------------------------------------------------------------------
# Network structure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Variable:
    id: int
    name: str
    values: tuple[str, ...]

    @property
    def cardinality(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class IdmRows:
    """Rows of a node whose parameters are affine in Dirichlet location
    hyperparameters: ``theta = (s * t + N) / (s + sum_j N)``."""

    s: float
    counts: dict[int, tuple[float, ...]]


@dataclass(frozen=True)
class NodeSpec:
    """Local specification of one node.

    ``numeric_rows`` maps a parent configuration index to a probability
    vector; ``interval_rows`` maps ``(value, configuration)`` to ``(lo, hi)``.
    Rows with neither are free and must be covered by ``relations`` or by
    flagging the node ``qualitative``.
    """

    name: str
    parents: tuple[str, ...] = ()
    numeric_rows: dict[int, tuple[float, ...]] = field(default_factory=dict)
    relations: tuple[QualitativeRelation, ...] = ()
    interval_rows: dict[tuple[int, int], tuple[float, float]] = field(default_factory=dict)
    tau: dict[int, tuple[float, ...]] = field(default_factory=dict)
    qualitative: bool = False
    idm: IdmRows | None = None

    def is_free_row(self, k: int) -> bool:
        return k not in self.numeric_rows


@dataclass(frozen=True)
class LogicAssessment:
    """``P(formula | condition) = alpha``; atoms denote value 0 of binary variables."""

    formula: BooleanFormula
    condition: tuple[tuple[str, int], ...]
    alpha: float
    text: str = field(default="", compare=False)


@dataclass(frozen=True)
class Query:
    target: str
    value: int = 0
    evidence: tuple[tuple[str, int], ...] = ()

    @classmethod
    def make(cls, target: str, value: int = 0,
             evidence: Mapping[str, int] | None = None) -> Query:
        return cls(target, value, tuple(sorted((evidence or {}).items())))

    @property
    def evidence_map(self) -> dict[str, int]:
        return dict(self.evidence)


@dataclass(frozen=True, eq=False)
class Network:
    variables: tuple[Variable, ...]
    nodes: tuple[NodeSpec, ...]
    logic_assessments: tuple[LogicAssessment, ...] = ()

    def __eq__(self, other):
        if not isinstance(other, Network):
            return NotImplemented
        return (self.variables == other.variables and self.nodes == other.nodes
                and self.logic_assessments == other.logic_assessments)

    __hash__ = object.__hash__

    @cached_property
    def _index(self) -> dict[str, int]:
        return {v.name: v.id for v in self.variables}

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise NetworkError(f"unknown variable {name!r}") from None

    def var(self, name: str) -> Variable:
        return self.variables[self.index(name)]

    def node(self, name: str) -> NodeSpec:
        return self.nodes[self.index(name)]

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def card(self, name: str) -> int:
        return self.var(name).cardinality

    def value_index(self, name: str, value: str) -> int:
        values = self.var(name).values
        if value not in values:
            raise NetworkError(f"variable {name!r} has no value {value!r}")
        return values.index(value)

    def parent_configs(self, name: str) -> list[tuple[int, ...]]:
        """Parent configurations in row order (last parent varies fastest)."""
        parents = self.node(name).parents
        return list(itertools.product(*(range(self.card(p)) for p in parents)))

    def n_configs(self, name: str) -> int:
        n = 1
        for p in self.node(name).parents:
            n *= self.card(p)
        return n

    def config_index(self, name: str, assignment: Mapping[str, int]) -> int:
        k = 0
        for p in self.node(name).parents:
            k = k * self.card(p) + assignment[p]
        return k

    def children(self, name: str) -> list[str]:
        return [n.name for n in self.nodes if name in n.parents]

    @cached_property
    def topological_order(self) -> tuple[str, ...]:
        order, state = [], {}

        def visit(name, stack):
            st = state.get(name)
            if st == 2:
                return
            if st == 1:
                raise NetworkError("cycle through " + " -> ".join(stack + [name]))
            state[name] = 1
            for p in self.node(name).parents:
                visit(p, stack + [name])
            state[name] = 2
            order.append(name)

        for v in self.variables:
            visit(v.name, [])
        return tuple(order)

    def ancestors(self, names: Iterable[str]) -> set[str]:
        """The given variables together with all their ancestors."""
        out, todo = set(), list(names)
        while todo:
            n = todo.pop()
            if n not in out:
                out.add(n)
                todo.extend(self.node(n).parents)
        return out


def make_network(variables: Sequence[tuple[str, Sequence[str]]],
                 nodes: Iterable[NodeSpec],
                 logic_assessments: Iterable[LogicAssessment] = ()) -> Network:
    """Assemble a network; node specs are re-ordered to match ``variables``."""
    vs = tuple(Variable(i, name, tuple(values)) for i, (name, values) in enumerate(variables))
    by_name = {}
    for spec in nodes:
        if spec.name in by_name:
            raise NetworkError(f"duplicate node spec for {spec.name!r}")
        by_name[spec.name] = spec
    missing = [v.name for v in vs if v.name not in by_name]
    extra = sorted(set(by_name) - {v.name for v in vs})
    if missing or extra:
        raise NetworkError(f"node specs do not match variables (missing={missing}, unknown={extra})")
    return Network(vs, tuple(by_name[v.name] for v in vs), tuple(logic_assessments))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok

    def __str__(self):
        return "ok" if self.ok else "\n".join(self.violations)


def validate_network(net: Network) -> ValidationReport:
    """Collect every structural and numeric violation in ``net``."""
    report = ValidationReport()
    bad = report.violations.append

    names = [v.name for v in net.variables]
    for name in sorted({n for n in names if names.count(n) > 1}):
        bad(f"duplicate variable name {name!r}")
    for v in net.variables:
        if v.cardinality < 2:
            bad(f"variable {v.name!r} has cardinality {v.cardinality} < 2")
        if len(set(v.values)) != v.cardinality:
            bad(f"variable {v.name!r} has repeated value names")
    if len(net.nodes) != len(net.variables):
        bad("every variable needs exactly one node spec")
        return report
    known = set(names)

    unresolved = False
    for v, spec in zip(net.variables, net.nodes):
        if spec.name != v.name:
            bad(f"node spec {spec.name!r} is stored at the slot of {v.name!r}")
        for p in spec.parents:
            if p not in known:
                bad(f"node {spec.name!r}: parent {p!r} does not resolve")
                unresolved = True
        if len(set(spec.parents)) != len(spec.parents):
            bad(f"node {spec.name!r}: repeated parent")
    if unresolved:
        return report
    try:
        net.topological_order
    except NetworkError as exc:
        bad(str(exc))
        return report

    for spec in net.nodes:
        _validate_node(net, spec, bad)
    for la in net.logic_assessments:
        for atom in la.formula.atoms():
            if atom not in known:
                bad(f"logic assessment {la.text!r}: unknown variable {atom!r}")
            elif net.card(atom) != 2:
                bad(f"logic assessment {la.text!r}: atom {atom!r} is not binary")
        for name, val in la.condition:
            if name not in known or not 0 <= val < net.card(name):
                bad(f"logic assessment {la.text!r}: bad condition {name}={val}")
        if not 0.0 <= la.alpha <= 1.0:
            bad(f"logic assessment {la.text!r}: alpha {la.alpha} outside [0, 1]")
    return report


def _validate_node(net: Network, spec: NodeSpec, bad) -> None:
    name, card = spec.name, net.card(spec.name)
    n_rows = net.n_configs(name)
    for k, row in spec.numeric_rows.items():
        if not 0 <= k < n_rows:
            bad(f"node {name!r}: numeric row {k} out of range")
            continue
        if len(row) != card:
            bad(f"node {name!r}: numeric row {k} has {len(row)} entries, expected {card}")
            continue
        if any(not 0.0 <= p <= 1.0 for p in row):
            bad(f"node {name!r}: numeric row {k} has entries outside [0, 1]")
        if abs(sum(row) - 1.0) > 1e-9:
            bad(f"node {name!r}: numeric row {k} sums to {sum(row):.12g}, not 1")
    for (j, k), (lo, hi) in spec.interval_rows.items():
        if not (0 <= j < card and 0 <= k < n_rows):
            bad(f"node {name!r}: interval ({j}, {k}) out of range")
        elif not 0.0 <= lo <= hi <= 1.0:
            bad(f"node {name!r}: interval ({j}, {k}) = [{lo}, {hi}] is not within 0 <= lo <= hi <= 1")
        elif k in spec.numeric_rows:
            bad(f"node {name!r}: row {k} is both numeric and interval-valued")
    for k in range(n_rows):
        ivs = [spec.interval_rows.get((j, k)) for j in range(card)]
        if any(ivs):
            lo = sum(iv[0] if iv else 0.0 for iv in ivs)
            hi = sum(iv[1] if iv else 1.0 for iv in ivs)
            if lo > 1.0 + 1e-12 or hi < 1.0 - 1e-12:
                bad(f"node {name!r}: intervals of row {k} admit no distribution")
    for k, row in spec.tau.items():
        if not 0 <= k < n_rows or len(row) != card or abs(sum(row) - 1.0) > 1e-9 \
                or any(p < 0 for p in row):
            bad(f"node {name!r}: prior mean row {k} is not a distribution over {card} values")
    if spec.idm is not None:
        if spec.idm.s <= 0:
            bad(f"node {name!r}: IDM dispersion must be positive")
        for k, row in spec.idm.counts.items():
            if not 0 <= k < n_rows or len(row) != card or any(c < 0 for c in row):
                bad(f"node {name!r}: IDM count row {k} is malformed")
            elif k in spec.numeric_rows:
                bad(f"node {name!r}: row {k} is both numeric and IDM")

    parents = set(spec.parents)
    for rel in spec.relations:
        label = rel.describe(name)
        if rel.sign not in SIGNS:
            bad(f"{label}: unknown sign {rel.sign!r}")
        need = 2 if rel.kind in (RelationKind.ADDITIVE_SYNERGY, RelationKind.PRODUCT_SYNERGY) else 1
        if len(rel.sources) != need or len(set(rel.sources)) != need:
            bad(f"{label}: expected {need} distinct source variable(s)")
        for s in rel.sources:
            if s not in parents:
                bad(f"{label}: source {s!r} is not a parent of {name!r}")
        if card != 2 or any(s in parents and net.card(s) != 2 for s in rel.sources):
            bad(f"{label}: qualitative relation on non-binary variable")
        has_delta = rel.kind in (RelationKind.WEAK, RelationKind.STRONG)
        if has_delta != (rel.delta is not None):
            bad(f"{label}: cut-off delta must be given exactly for weak/strong influences")
        if has_delta and rel.delta is not None:
            if not 0.0 <= rel.delta <= 1.0:
                bad(f"{label}: delta {rel.delta} outside [0, 1]")
            if rel.sign not in ("+", "-"):
                bad(f"{label}: weak/strong influences take sign + or -")
        if rel.kind is RelationKind.PRODUCT_SYNERGY and not 0 <= rel.target < card:
            bad(f"{label}: target value {rel.target} out of range")
        if rel.kind is RelationKind.SITUATIONAL:
            others = [p for p in spec.parents if p not in rel.sources]
            ctx = dict(rel.context)
            if sorted(ctx) != sorted(others):
                bad(f"{label}: context must instantiate exactly {others}")
            elif any(not 0 <= ctx[p] < net.card(p) for p in others):
                bad(f"{label}: context value out of range")
        elif rel.context:
            bad(f"{label}: only situational signs take a context")

    if not (spec.relations or spec.qualitative):
        idm_rows = spec.idm.counts if spec.idm else {}
        interval_ks = {k for (_, k) in spec.interval_rows}
        for k in range(n_rows):
            if k not in spec.numeric_rows and k not in interval_ks and k not in idm_rows:
                bad(f"node {name!r}: neither numeric rows nor relations for parent configuration {k}")


# ---------------------------------------------------------------------------
# EMAJSAT gadget
# ---------------------------------------------------------------------------

BOOL = ("true", "false")


def formula_variables(phi: BooleanFormula) -> list[str]:
    return sorted(phi.atoms(), key=natural_key)


def build_emajsat_gadget(phi: BooleanFormula, k: int,
                         variables: Sequence[str] | None = None) -> tuple[Network, Query]:
    """Network whose influence of ``E=e`` on ``Q`` has a negative minimum
    exactly when some assignment of the first ``k`` variables makes a strict
    majority of the remaining worlds satisfy ``phi``.

    Operator nodes are named ``W0`` (the formula root) and ``W1...`` in
    post-order; a bare atom gets an identity node as ``W0``.
    """
    xs = list(variables) if variables is not None else formula_variables(phi)
    n = len(xs)
    if not 1 <= k <= n:
        raise NetworkError(f"k={k} must lie in [1, {n}]")
    reserved = {"E", "Q"}
    if any(x in reserved or re.fullmatch(r"W\d+", x) for x in xs):
        raise NetworkError("formula variables may not be named E, Q or W<digits>")

    specs: list[NodeSpec] = []
    for i, x in enumerate(xs):
        if i < k:
            specs.append(NodeSpec(x, qualitative=True))
        else:
            specs.append(NodeSpec(x, numeric_rows={0: (0.5, 0.5)}))

    ops: list[tuple[BooleanFormula, list[str]]] = []
    node_of: dict[int, str] = {}

    def operand(f: BooleanFormula) -> str:
        return f.name if isinstance(f, Atom) else node_of[id(f)]

    for f in phi.walk():
        if isinstance(f, Atom) or id(f) in node_of:
            continue
        ops.append((f, [operand(c) for c in f.children]))
        node_of[id(f)] = f"_op{len(ops)}"
    if not ops:
        ops.append((phi, [phi.name]))  # type: ignore[attr-defined]
        node_of[id(phi)] = "_op1"

    rename = {node_of[id(ops[-1][0])]: "W0"}
    for i, (f, _) in enumerate(ops[:-1], start=1):
        rename[node_of[id(f)]] = f"W{i}"
    op_names = []
    for f, operands in ops:
        parents = tuple(dict.fromkeys(rename.get(o, o) for o in operands))
        rows = {}
        for kk, cfg in enumerate(itertools.product(range(2), repeat=len(parents))):
            truth = {p: cfg[i] == 0 for i, p in enumerate(parents)}
            if isinstance(f, Atom):
                val = truth[parents[0]]
            else:
                sub = {rename.get(o, o): truth[rename.get(o, o)] for o in operands}
                args = [sub[rename.get(o, o)] for o in operands]
                if isinstance(f, Not):
                    val = not args[0]
                elif isinstance(f, And):
                    val = args[0] and args[1]
                else:
                    val = args[0] or args[1]
            rows[kk] = (1.0, 0.0) if val else (0.0, 1.0)
        name = rename[node_of[id(f)]]
        op_names.append(name)
        specs.append(NodeSpec(name, parents, numeric_rows=rows))

    specs.append(NodeSpec("E", qualitative=True))
    # rows over (W0, E): (w0,e), (w0,~e), (~w0,e), (~w0,~e)
    specs.append(NodeSpec("Q", ("W0", "E"), numeric_rows={
        0: (0.5, 0.5), 1: (1.0, 0.0), 2: (0.5, 0.5), 3: (0.0, 1.0)}))

    ordered = xs + sorted(op_names, key=natural_key) + ["E", "Q"]
    values = {name: BOOL for name in ordered}
    values["E"] = ("e", "not_e")
    values["Q"] = ("q", "not_q")
    net = make_network([(name, values[name]) for name in ordered], specs)
    return net, Query.make("Q", 0, {"E": 0})
