"""Seeded random networks for differential tests and experiments."""

from __future__ import annotations

import itertools

import numpy as np

from .model import (
    Network,
    NodeSpec,
    QualitativeRelation,
    Query,
    RelationKind,
    make_network,
    validate_network,
)

BINARY = ("hi", "lo")
RELATION_KINDS = tuple(RelationKind)


def _random_dag(rng, n: int, max_parents: int) -> list[tuple[str, ...]]:
    parents = []
    for i in range(n):
        pool = list(range(i))
        m = int(rng.integers(0, min(max_parents, i) + 1))
        chosen = sorted(rng.choice(pool, size=m, replace=False).tolist()) if m else []
        parents.append(tuple(f"V{j}" for j in chosen))
    return parents


def _random_row(rng, card: int, margin: float = 0.05) -> tuple[float, ...]:
    p = rng.dirichlet(np.ones(card))
    p = margin + (1 - card * margin) * p
    p = p / p.sum()
    return tuple(float(x) for x in p)


def random_numeric_network(rng: np.random.Generator, n_nodes: int | None = None,
                           max_parents: int = 3, max_nodes: int = 12) -> Network:
    """Fully numeric binary network with rows bounded away from 0 and 1."""
    n = int(n_nodes if n_nodes is not None else rng.integers(2, max_nodes + 1))
    parents = _random_dag(rng, n, max_parents)
    specs = []
    for i, ps in enumerate(parents):
        rows = {k: _random_row(rng, 2) for k in range(2 ** len(ps))}
        specs.append(NodeSpec(f"V{i}", ps, numeric_rows=rows))
    return make_network([(f"V{i}", BINARY) for i in range(n)], specs)


def _relation(rng, kind: RelationKind, parents: tuple[str, ...]):
    """A random relation of ``kind`` over ``parents`` or None if inapplicable."""
    signs = ("+", "-", "0", "?")
    pick = lambda: str(rng.choice(signs, p=[0.4, 0.4, 0.1, 0.1]))
    if kind in (RelationKind.ADDITIVE_SYNERGY, RelationKind.PRODUCT_SYNERGY):
        if len(parents) < 2:
            return None
        a, b = sorted(rng.choice(parents, size=2, replace=False).tolist())
        if kind is RelationKind.ADDITIVE_SYNERGY:
            return QualitativeRelation.additive_synergy(a, b, pick())
        return QualitativeRelation.product_synergy(a, b, pick(), target=int(rng.integers(0, 2)))
    if not parents:
        return None
    src = str(rng.choice(parents))
    if kind is RelationKind.INFLUENCE:
        return QualitativeRelation.influence(src, pick())
    if kind is RelationKind.SITUATIONAL:
        ctx = {p: int(rng.integers(0, 2)) for p in parents if p != src}
        return QualitativeRelation.situational(src, pick(), ctx)
    sign = str(rng.choice(("+", "-")))
    delta = float(np.round(rng.uniform(0.1, 0.5), 2))
    if kind is RelationKind.WEAK:
        return QualitativeRelation.weak(src, sign, delta)
    return QualitativeRelation.strong(src, sign, delta)


def random_sqpn(rng: np.random.Generator, max_nodes: int = 8, max_free: int = 6,
                kinds: tuple[RelationKind, ...] = RELATION_KINDS,
                require_kind: RelationKind | None = None) -> Network:
    """Binary SQPN with at most ``max_free`` free parameters.

    Qualitative nodes have every row free; relations are drawn from
    ``kinds``.  ``require_kind`` forces at least one relation of that kind
    (the DAG is re-drawn until the kind is applicable).
    """
    for _ in range(1000):
        n = int(rng.integers(3, max_nodes + 1))
        parents = _random_dag(rng, n, 3)
        order = rng.permutation(n).tolist()
        qualitative, budget = set(), max_free
        for i in order:
            rows = 2 ** len(parents[i])
            if rows <= budget and rng.random() < 0.6:
                qualitative.add(i)
                budget -= rows
        if require_kind is not None:
            need = 2 if require_kind in (RelationKind.ADDITIVE_SYNERGY,
                                         RelationKind.PRODUCT_SYNERGY) else 1
            hosts = [i for i in qualitative if len(parents[i]) >= need]
            if not hosts:
                continue
        specs = []
        forced = require_kind is None
        for i, ps in enumerate(parents):
            name = f"V{i}"
            if i not in qualitative:
                specs.append(NodeSpec(name, ps, numeric_rows={k: _random_row(rng, 2)
                                                              for k in range(2 ** len(ps))}))
                continue
            rels = []
            if ps:
                for _ in range(int(rng.integers(1, 3))):
                    r = _relation(rng, kinds[int(rng.integers(len(kinds)))], ps)
                    if r is not None and r not in rels:
                        rels.append(r)
                if not forced and len(ps) >= (2 if require_kind in (
                        RelationKind.ADDITIVE_SYNERGY, RelationKind.PRODUCT_SYNERGY) else 1):
                    r = _relation(rng, require_kind, ps)
                    if r is not None and r not in rels:
                        rels.append(r)
                        forced = True
            specs.append(NodeSpec(name, ps, relations=tuple(rels), qualitative=True))
        if not forced:
            continue
        net = make_network([(f"V{i}", BINARY) for i in range(n)], specs)
        if validate_network(net).ok and _satisfiable(net, rng):
            return net
    raise RuntimeError("could not draw a valid random SQPN")


def _satisfiable(net: Network, rng, tries: int = 2000) -> bool:
    """Cheap screen: some random CPT satisfies every relation strictly enough
    for the instance to have a feasible interior-ish point."""
    from .constraints import compile_relations

    cs = compile_relations(net)
    free = [v for v in cs.variables if cs.boxes[v][0] < cs.boxes[v][1]]
    if not free:
        return True
    for _ in range(tries):
        point = {v: cs.boxes[v][0] for v in cs.variables}
        rows = {}
        for v in free:
            rows.setdefault((v.i, v.k), []).append(v)
        for vs in rows.values():
            p = rng.dirichlet(np.ones(len(vs)))
            for v, x in zip(vs, p):
                point[v] = float(x)
        if cs.max_violation(point) <= 1e-9:
            return True
        # rows that must be tied by an equality are hard to hit by sampling
        if any(c.cmp == "=" and c.tag != "normalization" for c in cs.constraints):
            return True
    return False


def random_query(rng: np.random.Generator, net: Network) -> Query:
    """Influence query between two distinct variables, target not observed."""
    names = net.names
    pairs = [(q, e) for q, e in itertools.permutations(names, 2)]
    q, e = pairs[int(rng.integers(len(pairs)))]
    return Query.make(q, int(rng.integers(0, 2)), {e: int(rng.integers(0, 2))})


def count_free_parameters(net: Network) -> int:
    total = 0
    for spec in net.nodes:
        card = net.card(spec.name)
        for k in range(net.n_configs(spec.name)):
            if k not in spec.numeric_rows:
                total += card - 1
    return total
