import json
from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, strategies as st

from deepalm.serde import (
    FORMAT_TRACE,
    FormatError,
    dumps,
    format_rfc3339,
    load_json,
    parse_rfc3339,
    read_document,
    utc_from_epoch,
    write_document,
)


def test_parse_z_suffix():
    dt = parse_rfc3339("2024-05-01T12:00:00Z")
    assert dt == datetime(2024, 5, 1, 12, tzinfo=timezone.utc)


def test_parse_numeric_offset_normalizes_to_utc():
    dt = parse_rfc3339("2024-05-01T14:30:00+02:30")
    assert dt == datetime(2024, 5, 1, 12, tzinfo=timezone.utc)
    assert dt.tzinfo == timezone.utc


def test_parse_fractional_seconds():
    dt = parse_rfc3339("2024-05-01T12:00:00.250Z")
    assert dt.microsecond == 250000


@pytest.mark.parametrize("bad", ["", "garbage", "2024-05-01T12:00:00", "2024-13-01T00:00:00Z"])
def test_parse_rejects_bad_timestamps(bad):
    with pytest.raises(FormatError):
        parse_rfc3339(bad)


def test_format_second_precision():
    assert format_rfc3339(datetime(2024, 5, 1, 12, tzinfo=timezone.utc)) == "2024-05-01T12:00:00Z"


def test_format_keeps_microseconds():
    dt = datetime(2024, 5, 1, 12, 0, 0, 123456, tzinfo=timezone.utc)
    assert format_rfc3339(dt) == "2024-05-01T12:00:00.123456Z"


@given(st.integers(min_value=0, max_value=4_000_000_000), st.integers(min_value=0, max_value=999999))
def test_rfc3339_round_trip(epoch_s, micro):
    dt = utc_from_epoch(epoch_s) + timedelta(microseconds=micro)
    assert parse_rfc3339(format_rfc3339(dt)) == dt


def test_dumps_sorted_and_strict():
    assert dumps({"b": 1, "a": 2}) == '{"a": 2, "b": 1}'
    with pytest.raises(ValueError):
        dumps({"x": float("inf")})


def test_document_round_trip(tmp_path):
    path = tmp_path / "doc.json"
    write_document(path, {"format": FORMAT_TRACE, "route_id": "r1"})
    doc = read_document(path, FORMAT_TRACE)
    assert doc["route_id"] == "r1"


def test_read_document_checks_format_tag(tmp_path):
    path = tmp_path / "doc.json"
    write_document(path, {"format": "other/9"})
    with pytest.raises(FormatError, match="expected format"):
        read_document(path, FORMAT_TRACE)


def test_read_document_rejects_non_object(tmp_path):
    path = tmp_path / "arr.json"
    path.write_text("[1, 2, 3]")
    with pytest.raises(FormatError, match="object"):
        read_document(path)


def test_read_document_missing_file():
    with pytest.raises(FormatError, match="cannot read"):
        read_document("/nonexistent/never.json")


def test_load_json_text_and_dict():
    assert load_json('{"format": "x/1", "k": 1}', "x/1")["k"] == 1
    assert load_json({"format": "x/1"}, "x/1")["format"] == "x/1"
    with pytest.raises(FormatError):
        load_json("{not json", None)
    with pytest.raises(FormatError):
        load_json({"format": "y/1"}, "x/1")


def test_dumps_is_valid_json_round_trip():
    doc = {"nested": {"vals": [1.5, -2.25]}, "s": "täxt"}
    assert json.loads(dumps(doc)) == doc
