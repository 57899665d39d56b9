import json
import os

import numpy as np

from stratsim.config import config_hash
from stratsim.report import (
    PDF_CREATION_DATE,
    ReportBundle,
    atomic_write_text,
    format_cell,
    load_bundle,
    table_to_pdf,
    to_jsonable,
    write_csv,
)


def test_atomic_write_leaves_no_temporaries(tmp_path):
    path = tmp_path / "sub" / "a.txt"
    atomic_write_text(str(path), "um")
    atomic_write_text(str(path), "dois")
    assert path.read_text(encoding="utf-8") == "dois"
    assert os.listdir(tmp_path / "sub") == ["a.txt"]


def test_format_cell():
    assert format_cell(0.1) == "0.10000000000000001"
    assert format_cell(np.float64(0.5)) == "0.5"
    assert format_cell(None) == ""
    assert format_cell(True) == "true"
    assert format_cell(np.bool_(False)) == "false"
    assert format_cell((0, 2)) == "0 2"
    assert format_cell(3) == "3"


def test_write_csv_union_of_columns(tmp_path):
    path = tmp_path / "t.csv"
    write_csv(str(path), [{"a": 1, "b": 0.25}, {"a": 2, "c": "x"}])
    assert path.read_text(encoding="utf-8").splitlines() == ["a,b,c", "1,0.25,", "2,,x"]


def test_to_jsonable_numpy():
    data = {1: np.arange(3), "x": np.float64(0.5), "ok": np.bool_(True), "n": np.int64(7)}
    assert to_jsonable(data) == {"1": [0, 1, 2], "x": 0.5, "ok": True, "n": 7}


def test_bundle_roundtrip(tmp_path):
    config = {"instance": {"scenario": "s1"}, "engine": {"seeds": [0]}}
    value = 0.1 + 0.2
    bundle = ReportBundle("trust", config, {"gap": value, "inf": float("inf")}, rng="philox")
    path = bundle.write(str(tmp_path))
    assert path == str(tmp_path / "trust.json")
    assert (tmp_path / "trust.run.json").exists()

    loaded = load_bundle(path)
    assert loaded["metadata"]["config_hash"] == config_hash(loaded["config"])
    assert loaded["metadata"]["command"] == "trust"
    assert loaded["metadata"]["rng"] == "philox"
    assert loaded["payload"]["gap"] == value
    assert loaded["payload"]["inf"] == float("inf")

    first = (tmp_path / "trust.json").read_bytes()
    bundle.write(str(tmp_path))
    assert (tmp_path / "trust.json").read_bytes() == first
    assert json.loads(first)["config"] == config


def test_table_to_pdf(tmp_path):
    path = tmp_path / "tabela.pdf"
    table_to_pdf([("prop", "pass"), (1, True), (2, 0.125)], str(path), title="Reprodução")
    assert path.read_bytes().startswith(b"%PDF")


def test_table_to_pdf_is_byte_identical(tmp_path):
    rows = [("prop", "pass", "detail"), (5, False, "com eta=0.5, q4 NÃO domina q1")]
    table_to_pdf(rows, str(tmp_path / "a.pdf"), title="Reprodução")
    table_to_pdf(rows, str(tmp_path / "b.pdf"), title="Reprodução")
    data = (tmp_path / "a.pdf").read_bytes()
    assert data == (tmp_path / "b.pdf").read_bytes()
    assert f"/CreationDate (D:{PDF_CREATION_DATE})".encode("ascii") in data
