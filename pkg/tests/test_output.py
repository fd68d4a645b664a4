"""Deterministic formatting and atomic writes."""

import json
import math
import os

from extremogrid.output import (
    atomic_write_bytes,
    atomic_write_text,
    config_hash,
    csv_text,
    fmt,
    json_text,
)


def test_fmt_floats_round_trip():
    for x in (1 / 3, 2.0 / 3.0, 1e-17, 123456.789, -0.0):
        assert float(fmt(x)) == x
    assert fmt(float("inf")) == "inf"
    assert fmt(float("-inf")) == "-inf"
    assert fmt(True) == "true" and fmt(False) == "false"
    assert fmt(7) == "7"
    assert fmt("label") == "label"


def test_fmt_seventeen_significant_digits():
    assert fmt(2.0 / 3.0) == "0.66666666666666663"
    assert "." in fmt(1.5) and "," not in fmt(123456.5)


def test_csv_text_layout():
    text = csv_text(
        ["a", "b"],
        [{"a": 1, "b": 0.5}, {"a": 2, "b": float("inf")}],
        header_lines=["config_hash: abc", "n: 5"],
    )
    lines = text.splitlines()
    assert lines[0] == "# config_hash: abc"
    assert lines[2] == "a,b"
    assert lines[3] == "1,0.5"
    assert lines[4] == "2,inf"
    assert text.endswith("\n")


def test_json_text_sorted_and_stable():
    one = json_text({"b": 1, "a": [1, 2]})
    two = json_text({"a": [1, 2], "b": 1})
    assert one == two
    assert json.loads(one) == {"a": [1, 2], "b": 1}


def test_config_hash_order_invariant():
    assert config_hash({"x": 1, "y": 2}) == config_hash({"y": 2, "x": 1})
    assert config_hash({"x": 1}) != config_hash({"x": 2})
    assert len(config_hash({})) == 16


def test_atomic_write_replaces_and_cleans(tmp_path):
    target = tmp_path / "out.txt"
    atomic_write_text(target, "first")
    atomic_write_text(target, "second")
    assert target.read_text() == "second"
    atomic_write_bytes(target, b"third")
    assert target.read_bytes() == b"third"
    assert os.listdir(tmp_path) == ["out.txt"]


def test_fmt_nan_not_special():
    # not-a-number renders as text; downstream schemas never emit it
    assert fmt(math.nan) == "nan"
