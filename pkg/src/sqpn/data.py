"""On-disk formats: network documents (JSON), datasets (CSV) and reports.

The first value listed for a variable is its "higher" value; every sign in
a relation is read with respect to that ordering.

Network document layout::

    {"variables": [{"name": "Y", "values": ["y", "ybar"]}, ...],
     "nodes": [{"name": "X", "parents": ["Y", "Z"],
                "cpt": {"y,z": [0.5, 0.5], ...},
                "intervals": [{"value": "x", "given": "y,z", "lo": 0.1, "hi": 0.4}],
                "relations": [{"kind": "influence", "sign": "+", "sources": ["Y"]}],
                "tau": {"y,z": [0.5, 0.5]},
                "qualitative": true,
                "idm": {"s": 2, "counts": {"y,z": [3, 3]}}}],
     "logic_assessments": [{"formula": "A | !B", "condition": {"C": "c"}, "alpha": 0.3}]}

Rows are keyed by the comma-joined parent values; a root uses the key "".
Optional fields may be omitted.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .model import (
    IdmRows,
    LogicAssessment,
    Network,
    NetworkError,
    NodeSpec,
    QualitativeRelation,
    RelationKind,
    make_network,
    parse_formula,
    validate_network,
)


class DocumentError(NetworkError):
    """Malformed document; the message names the offending field or line."""


# ---------------------------------------------------------------------------
# Network documents
# ---------------------------------------------------------------------------

FIXTURES = Path(__file__).with_name("fixtures")


def fixture_path(name: str) -> Path:
    """Path of a bundled fixture such as ``example4.net`` or ``gadget-corpus``."""
    path = FIXTURES / name
    if not path.exists():
        raise FileNotFoundError(f"no bundled fixture {name!r}")
    return path


def _configs(net_values: Mapping[str, Sequence[str]], parents: Sequence[str]):
    return list(itertools.product(*(net_values[p] for p in parents)))


def _row_key(cfg: Sequence[str]) -> str:
    return ",".join(cfg)


def _require(obj: Mapping, key: str, where: str, kind=None):
    if key not in obj:
        raise DocumentError(f"{where}: missing field {key!r}")
    val = obj[key]
    if kind is not None and not isinstance(val, kind):
        raise DocumentError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}")
    return val


def _check_keys(obj: Mapping, allowed: set[str], where: str) -> None:
    extra = sorted(set(obj) - allowed)
    if extra:
        raise DocumentError(f"{where}: unknown field(s) {extra}")


def _value_index(values: Sequence[str], value, where: str) -> int:
    if value not in values:
        raise DocumentError(f"{where}: unknown value {value!r} (expected one of {list(values)})")
    return list(values).index(value)


def _number_row(row, card: int, where: str) -> tuple[float, ...]:
    if not isinstance(row, list) or len(row) != card or \
            not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in row):
        raise DocumentError(f"{where}: expected a list of {card} numbers")
    return tuple(float(x) for x in row)


def _rows(obj, index: dict[str, int], card: int, where: str) -> dict[int, tuple[float, ...]]:
    if isinstance(obj, list) and "" in index:
        obj = {"": obj}
    if not isinstance(obj, dict):
        raise DocumentError(f"{where}: expected an object keyed by parent values")
    out = {}
    for key, row in obj.items():
        if key not in index:
            raise DocumentError(f"{where}: unknown parent configuration {key!r}")
        out[index[key]] = _number_row(row, card, f"{where}[{key!r}]")
    return dict(sorted(out.items()))


def _relation(obj, spec_name: str, values: Mapping[str, Sequence[str]], where: str
              ) -> QualitativeRelation:
    if not isinstance(obj, dict):
        raise DocumentError(f"{where}: expected an object")
    _check_keys(obj, {"kind", "sign", "sources", "delta", "context", "target"}, where)
    kind_s = _require(obj, "kind", where, str)
    try:
        kind = RelationKind(kind_s)
    except ValueError:
        raise DocumentError(f"{where}: unknown relation kind {kind_s!r}") from None
    sign = _require(obj, "sign", where, str)
    sources = _require(obj, "sources", where, list)
    if not all(isinstance(s, str) for s in sources):
        raise DocumentError(f"{where}.sources: expected variable names")
    delta = obj.get("delta")
    if delta is not None and (isinstance(delta, bool) or not isinstance(delta, (int, float))):
        raise DocumentError(f"{where}.delta: expected a number")
    context = obj.get("context", {})
    if not isinstance(context, dict):
        raise DocumentError(f"{where}.context: expected an object")
    ctx = []
    for name, val in context.items():
        if name not in values:
            raise DocumentError(f"{where}.context: unknown variable {name!r}")
        ctx.append((name, _value_index(values[name], val, f"{where}.context.{name}")))
    target = 0
    if "target" in obj:
        target = _value_index(values[spec_name], obj["target"], f"{where}.target")
    return QualitativeRelation(kind, sign, tuple(sources),
                               None if delta is None else float(delta),
                               tuple(sorted(ctx)), target)


def _node(obj, values: Mapping[str, Sequence[str]], where: str) -> NodeSpec:
    if not isinstance(obj, dict):
        raise DocumentError(f"{where}: expected an object")
    _check_keys(obj, {"name", "parents", "cpt", "intervals", "relations", "tau",
                      "qualitative", "idm"}, where)
    name = _require(obj, "name", where, str)
    if name not in values:
        raise DocumentError(f"{where}: node {name!r} is not a declared variable")
    parents = obj.get("parents", [])
    if not isinstance(parents, list) or not all(isinstance(p, str) for p in parents):
        raise DocumentError(f"{where}.parents: expected a list of names")
    for p in parents:
        if p not in values:
            raise DocumentError(f"{where}.parents: unknown variable {p!r}")
    card = len(values[name])
    index = {_row_key(cfg): k for k, cfg in enumerate(_configs(values, parents))}
    cpt = _rows(obj.get("cpt", {}), index, card, f"{where}.cpt")
    tau = _rows(obj.get("tau", {}), index, card, f"{where}.tau")
    intervals = {}
    for n, iv in enumerate(obj.get("intervals", [])):
        w = f"{where}.intervals[{n}]"
        if not isinstance(iv, dict):
            raise DocumentError(f"{w}: expected an object")
        _check_keys(iv, {"value", "given", "lo", "hi"}, w)
        j = _value_index(values[name], _require(iv, "value", w), w)
        given = iv.get("given", "")
        if given not in index:
            raise DocumentError(f"{w}: unknown parent configuration {given!r}")
        lo, hi = _require(iv, "lo", w, (int, float)), _require(iv, "hi", w, (int, float))
        intervals[(j, index[given])] = (float(lo), float(hi))
    relations = tuple(_relation(r, name, values, f"{where}.relations[{n}]")
                      for n, r in enumerate(obj.get("relations", [])))
    qualitative = obj.get("qualitative", False)
    if not isinstance(qualitative, bool):
        raise DocumentError(f"{where}.qualitative: expected true or false")
    idm = None
    if "idm" in obj:
        w = f"{where}.idm"
        spec = obj["idm"]
        if not isinstance(spec, dict):
            raise DocumentError(f"{w}: expected an object")
        _check_keys(spec, {"s", "counts"}, w)
        s = _require(spec, "s", w, (int, float))
        idm = IdmRows(float(s), _rows(_require(spec, "counts", w), index, card, f"{w}.counts"))
    return NodeSpec(name, tuple(parents), numeric_rows=cpt, relations=relations,
                    interval_rows=dict(sorted(intervals.items())), tau=tau,
                    qualitative=qualitative, idm=idm)


def _logic(obj, values: Mapping[str, Sequence[str]], where: str) -> LogicAssessment:
    if not isinstance(obj, dict):
        raise DocumentError(f"{where}: expected an object")
    _check_keys(obj, {"formula", "condition", "alpha"}, where)
    text = _require(obj, "formula", where, str)
    try:
        formula = parse_formula(text)
    except (NetworkError, ValueError) as e:
        raise DocumentError(f"{where}.formula: {e}") from None
    cond = obj.get("condition", {})
    if not isinstance(cond, dict):
        raise DocumentError(f"{where}.condition: expected an object")
    condition = []
    for name, val in cond.items():
        if name not in values:
            raise DocumentError(f"{where}.condition: unknown variable {name!r}")
        condition.append((name, _value_index(values[name], val, f"{where}.condition.{name}")))
    alpha = _require(obj, "alpha", where, (int, float))
    return LogicAssessment(formula, tuple(sorted(condition)), float(alpha), text)


def network_from_dict(doc: Mapping[str, Any]) -> Network:
    if not isinstance(doc, dict):
        raise DocumentError("document: expected a JSON object")
    _check_keys(doc, {"variables", "nodes", "logic_assessments"}, "document")
    variables = []
    for n, v in enumerate(_require(doc, "variables", "document", list)):
        w = f"variables[{n}]"
        if not isinstance(v, dict):
            raise DocumentError(f"{w}: expected an object")
        _check_keys(v, {"name", "values"}, w)
        name = _require(v, "name", w, str)
        vals = _require(v, "values", w, list)
        if len(vals) < 2 or not all(isinstance(x, str) for x in vals) or len(set(vals)) != len(vals):
            raise DocumentError(f"{w}.values: expected at least two distinct value names")
        variables.append((name, tuple(vals)))
    values = dict(variables)
    if len(values) != len(variables):
        raise DocumentError("variables: duplicate variable name")
    nodes = [_node(obj, values, f"nodes[{n}]")
             for n, obj in enumerate(_require(doc, "nodes", "document", list))]
    logic = [_logic(obj, values, f"logic_assessments[{n}]")
             for n, obj in enumerate(doc.get("logic_assessments", []))]
    net = make_network(variables, nodes, logic)
    report = validate_network(net)
    if not report.ok:
        raise DocumentError("invalid network: " + "; ".join(report.violations))
    return net


def load_network(text: str) -> Network:
    """Parse and validate a network document."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise DocumentError(f"line {e.lineno}, column {e.colno}: {e.msg}") from None
    return network_from_dict(doc)


def network_to_dict(net: Network) -> dict[str, Any]:
    values = {v.name: v.values for v in net.variables}
    nodes = []
    for spec in net.nodes:
        keys = [_row_key(cfg) for cfg in _configs(values, spec.parents)]
        vals = values[spec.name]
        node: dict[str, Any] = {"name": spec.name, "parents": list(spec.parents)}
        if spec.numeric_rows:
            node["cpt"] = {keys[k]: list(r) for k, r in sorted(spec.numeric_rows.items())}
        if spec.interval_rows:
            node["intervals"] = [{"value": vals[j], "given": keys[k], "lo": lo, "hi": hi}
                                 for (j, k), (lo, hi) in sorted(spec.interval_rows.items())]
        if spec.relations:
            rels = []
            for r in spec.relations:
                d: dict[str, Any] = {"kind": r.kind.value, "sign": r.sign,
                                     "sources": list(r.sources)}
                if r.delta is not None:
                    d["delta"] = r.delta
                if r.context:
                    d["context"] = {n: values[n][v] for n, v in r.context}
                if r.kind is RelationKind.PRODUCT_SYNERGY:
                    d["target"] = vals[r.target]
                rels.append(d)
            node["relations"] = rels
        if spec.tau:
            node["tau"] = {keys[k]: list(r) for k, r in sorted(spec.tau.items())}
        if spec.qualitative:
            node["qualitative"] = True
        if spec.idm is not None:
            node["idm"] = {"s": spec.idm.s,
                           "counts": {keys[k]: list(r) for k, r in sorted(spec.idm.counts.items())}}
        nodes.append(node)
    doc: dict[str, Any] = {
        "variables": [{"name": v.name, "values": list(v.values)} for v in net.variables],
        "nodes": nodes,
    }
    if net.logic_assessments:
        doc["logic_assessments"] = [
            {"formula": la.text or str(la.formula),
             "condition": {n: values[n][v] for n, v in la.condition},
             "alpha": la.alpha}
            for la in net.logic_assessments]
    return doc


def dump_network(net: Network) -> str:
    return json.dumps(network_to_dict(net), indent=2) + "\n"


# ---------------------------------------------------------------------------
# Datasets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Dataset:
    """Complete records as value indices, one row per record."""

    columns: tuple[str, ...]
    records: np.ndarray

    def __len__(self) -> int:
        return len(self.records)


def load_dataset(text: str, net: Network) -> Dataset:
    """Parse CSV records: a header of variable names, then value names."""
    rows = list(csv.reader(io.StringIO(text)))
    while rows and not any(c.strip() for c in rows[-1]):
        rows.pop()
    if not rows:
        raise DocumentError("dataset: missing header row")
    header = [c.strip() for c in rows[0]]
    if len(set(header)) != len(header):
        raise DocumentError("dataset line 1: duplicate column")
    if sorted(header) != sorted(net.names):
        raise DocumentError(f"dataset line 1: columns {header} do not match the network "
                            f"variables {list(net.names)}")
    values = [net.var(h).values for h in header]
    out = np.zeros((len(rows) - 1, len(header)), dtype=int)
    for n, row in enumerate(rows[1:]):
        line = n + 2
        if len(row) != len(header):
            raise DocumentError(f"dataset line {line}: expected {len(header)} cells, got {len(row)}")
        for c, cell in enumerate(row):
            cell = cell.strip()
            if not cell:
                raise DocumentError(f"dataset line {line}: missing data unsupported "
                                    f"(empty cell in column {header[c]!r})")
            if cell not in values[c]:
                raise DocumentError(f"dataset line {line}: unknown value {cell!r} for "
                                    f"{header[c]!r}")
            out[n, c] = values[c].index(cell)
    return Dataset(tuple(header), out)


def dump_dataset(dataset: Dataset, net: Network) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(dataset.columns)
    for rec in dataset.records:
        w.writerow([net.var(c).values[v] for c, v in zip(dataset.columns, rec)])
    return buf.getvalue()


def load_counts(text: str, net: Network):
    """Counts document: ``{"N": 40, "counts": {"X": {"y,z": [3, 3], ...}, ...}}``."""
    from .learn import Counts

    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise DocumentError(f"line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(doc, dict) or "counts" not in doc:
        raise DocumentError("counts document: expected an object with field 'counts'")
    values = {v.name: v.values for v in net.variables}
    tables = {}
    for name, rows in doc["counts"].items():
        if name not in values:
            raise DocumentError(f"counts: unknown variable {name!r}")
        spec = net.node(name)
        index = {_row_key(cfg): k for k, cfg in enumerate(_configs(values, spec.parents))}
        parsed = _rows(rows, index, len(values[name]), f"counts.{name}")
        t = np.zeros((len(values[name]), len(index)))
        for k, r in parsed.items():
            t[:, k] = r
        tables[name] = t
    return Counts.from_tables(net, tables, doc.get("N"))


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------

def _clean(x):
    if isinstance(x, dict):
        return {k: _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.generic):
        x = x.item()
    if isinstance(x, float):
        if x != x:
            return None
        if x in (float("inf"), float("-inf")):
            return "inf" if x > 0 else "-inf"
        return round(x, 12) + 0.0
    return x


def write_report(result: Mapping[str, Any], wall_time: float | None = None) -> str:
    """Deterministic JSON for a result mapping; fields keep their given order.

    ``wall_time`` is appended last when given, so reports without it are
    byte-identical across runs.
    """
    doc = dict(result)
    if wall_time is not None:
        doc["wall_time"] = round(float(wall_time), 3)
    return json.dumps(_clean(doc), indent=2) + "\n"
