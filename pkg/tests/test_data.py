import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sqpn.constraints import compile_network
from sqpn.data import (
    DocumentError,
    dump_dataset,
    dump_network,
    fixture_path,
    load_counts,
    load_dataset,
    load_network,
    network_from_dict,
    network_to_dict,
    write_report,
)
from sqpn.generate import random_sqpn
from sqpn.learn import count_statistics, fit_idm

from conftest import EXAMPLE4_X


def small_doc(**node):
    return {"variables": [{"name": "A", "values": ["a", "abar"]}],
            "nodes": [{"name": "A", **node}]}


# -- network documents --------------------------------------------------------

@pytest.mark.parametrize("name", ["example4.net", "example5.net"])
def test_bundled_documents_round_trip(name):
    net = load_network(fixture_path(name).read_text())
    assert load_network(dump_network(net)) == net
    assert network_to_dict(network_from_dict(network_to_dict(net))) == network_to_dict(net)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_random_networks_round_trip(seed):
    net = random_sqpn(np.random.default_rng(seed))
    assert load_network(dump_network(net)) == net


def test_example4_document_compiles_to_five_constraints(example4):
    cs = compile_network(example4)
    assert len([c for c in cs.constraints if c.tag != "normalization"]) == 5


def test_unknown_relation_kind_named():
    doc = json.loads(fixture_path("example4.net").read_text())
    doc["nodes"][2]["relations"][0]["kind"] = "telepathy"
    with pytest.raises(DocumentError, match="telepathy"):
        network_from_dict(doc)


def test_row_summing_below_one_rejected():
    with pytest.raises(DocumentError, match="sums to"):
        network_from_dict(small_doc(cpt={"": [0.5, 0.4]}))


def test_syntax_error_reports_position():
    with pytest.raises(DocumentError, match="line 1"):
        load_network("{\"variables\": [")


def test_unknown_field_rejected():
    with pytest.raises(DocumentError, match="colour"):
        network_from_dict(small_doc(colour="red"))


def test_bad_formula_is_a_document_error():
    doc = small_doc(qualitative=True)
    doc["logic_assessments"] = [{"formula": "A &", "alpha": 0.5}]
    with pytest.raises(DocumentError, match="formula"):
        network_from_dict(doc)


def test_interval_and_logic_fields_survive():
    doc = small_doc(intervals=[{"value": "a", "given": "", "lo": 0.2, "hi": 0.6}])
    doc["logic_assessments"] = [{"formula": "A | !A", "alpha": 1.0}]
    net = network_from_dict(doc)
    assert net.node("A").interval_rows == {(0, 0): (0.2, 0.6)}
    assert load_network(dump_network(net)) == net


# -- datasets -----------------------------------------------------------------

def test_example4_dataset(example4):
    data = load_dataset(fixture_path("example4.csv").read_text(), example4)
    assert len(data) == 40
    assert np.array_equal(count_statistics(data, example4).table("X"), EXAMPLE4_X)


def test_empty_body_is_valid(example4):
    data = load_dataset("Y,Z,X\n", example4)
    assert len(data) == 0


def test_empty_cell_rejected(example4):
    with pytest.raises(DocumentError, match="missing data unsupported"):
        load_dataset("Y,Z,X\ny,,x\n", example4)


def test_unknown_value_rejected(example4):
    with pytest.raises(DocumentError, match="line 2"):
        load_dataset("Y,Z,X\ny,maybe,x\n", example4)


def test_column_mismatch_rejected(example4):
    with pytest.raises(DocumentError):
        load_dataset("Y,Z\ny,z\n", example4)


def test_dataset_round_trip(example4):
    data = load_dataset(fixture_path("example4.csv").read_text(), example4)
    again = load_dataset(dump_dataset(data, example4), example4)
    assert again.columns == data.columns and np.array_equal(again.records, data.records)


def test_column_order_is_free(example4):
    data = load_dataset("X,Y,Z\nx,y,zbar\nxbar,ybar,z\n", example4)
    counts = count_statistics(data, example4)
    assert counts.table("X")[0, 1] == 1 and counts.table("X")[1, 2] == 1


def test_counts_document(example5):
    counts = load_counts(fixture_path("example5-counts.json").read_text(), example5)
    assert counts.n == 40
    assert np.array_equal(counts.table("X"), EXAMPLE4_X)
    assert np.array_equal(counts.table("Y"), [[29], [11]])


# -- reports ------------------------------------------------------------------

def test_report_keeps_field_order_and_sign():
    text = write_report({"sign": "positive", "interval": [0.1, 0.3], "gap": 1e-5})
    doc = json.loads(text)
    assert list(doc) == ["sign", "interval", "gap"]
    assert '"sign": "positive"' in text


def test_report_is_deterministic():
    result = {"interval": [np.float64(0.1) + 0.2, 0.3], "nodes": np.int64(7)}
    assert write_report(result) == write_report(dict(result))
    assert json.loads(write_report(result))["nodes"] == 7


def test_report_wall_time_last():
    doc = json.loads(write_report({"a": 1}, wall_time=0.12345))
    assert list(doc) == ["a", "wall_time"] and doc["wall_time"] == 0.123


def test_report_encodes_infinities():
    assert json.loads(write_report({"gap": float("inf")}))["gap"] == "inf"


def test_idm_expressions_serialize(example5, example5_counts):
    credal = fit_idm(example5, example5_counts)
    text = write_report({"expressions": credal.describe()})
    assert "(2t[x|y,z] + 3)/8" in text
