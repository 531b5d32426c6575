import json

import pytest

from slicesteer.traces import (INTRA_FIELDS, read_column, read_csv,
                               read_explanations, read_summary, write_csv,
                               write_explanations, write_summary)
from slicesteer.xrl import ExplanationRecord


def test_csv_roundtrip_preserves_float_text(tmp_path):
    path = tmp_path / "t.csv"
    rows = [
        {"tti": 0, "slice": "embb", "utilization": 48, "drained_bits": 1234.5},
        {"tti": 1, "slice": "embb", "utilization": 0, "drained_bits": 0.1},
    ]
    write_csv(path, ("tti", "slice", "utilization", "drained_bits"), rows)
    text = path.read_text()
    # shortest round-trip text keeps equality after parsing
    assert "0.1" in text and "1234.5" in text
    back = read_csv(path)
    assert back[0]["slice"] == "embb"
    assert float(back[1]["drained_bits"]) == 0.1


def test_csv_encodes_missing_none_and_bool(tmp_path):
    path = tmp_path / "w.csv"
    write_csv(path, INTRA_FIELDS, [{"window": 0, "slice": "urllc",
                                    "d_avg": None, "steered": True}])
    row = read_csv(path)[0]
    assert row["d_avg"] == ""
    assert row["steered"] == "1"
    assert row["loss"] == ""  # key absent from the dict entirely


def test_csv_writes_are_byte_identical(tmp_path):
    rows = [{"tti": i, "slice": "mmtc", "utilization": i % 3,
             "drained_bits": i * 0.25} for i in range(20)]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    fields = ("tti", "slice", "utilization", "drained_bits")
    write_csv(a, fields, rows)
    write_csv(b, fields, rows)
    assert a.read_bytes() == b.read_bytes()


def test_read_column_filters_and_skips_blanks(tmp_path):
    path = tmp_path / "c.csv"
    write_csv(path, ("slice", "x"), [
        {"slice": "embb", "x": 1.0},
        {"slice": "urllc", "x": 2.0},
        {"slice": "embb", "x": None},
        {"slice": "embb", "x": 3.0},
    ])
    assert read_column(path, "x") == [1.0, 2.0, 3.0]
    assert read_column(path, "x", where={"slice": "embb"}) == [1.0, 3.0]
    with pytest.raises(KeyError):
        read_column(path, "nope")


def test_explanation_log_roundtrip(tmp_path):
    path = tmp_path / "e.jsonl"
    rec = ExplanationRecord(window=4, agent="inter", procedure="ar4",
                            original=0, steered=2, original_label="8+4+2",
                            steered_label="6+6+2", attributes={},
                            sentence="replaced action 8+4+2 with 6+6+2")
    write_explanations(path, [rec])
    lines = path.read_text().splitlines()
    assert len(lines) == 1
    assert json.loads(lines[0])["steered_label"] == "6+6+2"
    assert read_explanations(path)[0]["window"] == 4
    # an empty log is a valid, empty file
    write_explanations(tmp_path / "none.jsonl", [])
    assert read_explanations(tmp_path / "none.jsonl") == []


def test_summary_is_versioned_and_stable(tmp_path):
    path = tmp_path / "s.json"
    write_summary(path, {"seed": 7, "slices": {"embb": {"drained": 1.0}}})
    back = read_summary(path)
    assert back["schema_version"] == 1
    assert back["seed"] == 7
    again = tmp_path / "s2.json"
    write_summary(again, {"seed": 7, "slices": {"embb": {"drained": 1.0}}})
    assert path.read_bytes() == again.read_bytes()
