"""RFC 3339 timestamps and the versioned JSON document formats.

Every file the tools read or write is a JSON object with a ``format`` tag:
``deepalm-route/1``, ``deepalm-trace/1``, ``deepalm-telemetry/1``,
``deepalm-rules/1``, ``deepalm-config/1``, ``deepalm-scenario/1``. Floats go
through :func:`json.dumps` untouched, which serializes the shortest
round-trip-exact decimal form.
"""

from __future__ import annotations

import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

FORMAT_ROUTE = "deepalm-route/1"
FORMAT_TRACE = "deepalm-trace/1"
FORMAT_TELEMETRY = "deepalm-telemetry/1"
FORMAT_RULES = "deepalm-rules/1"
FORMAT_CONFIG = "deepalm-config/1"
FORMAT_SCENARIO = "deepalm-scenario/1"


class FormatError(ValueError):
    """A document failed to parse or carried the wrong format tag."""


def parse_rfc3339(text: str) -> datetime:
    """Parse an RFC 3339 timestamp to an aware UTC datetime."""
    if not isinstance(text, str) or not text:
        raise FormatError(f"bad timestamp: {text!r}")
    normalized = text[:-1] + "+00:00" if text.endswith(("Z", "z")) else text
    try:
        dt = datetime.fromisoformat(normalized)
    except ValueError as exc:
        raise FormatError(f"bad timestamp {text!r}: {exc}") from exc
    if dt.tzinfo is None:
        raise FormatError(f"bad timestamp {text!r}: missing UTC offset")
    return dt.astimezone(timezone.utc)


def format_rfc3339(dt: datetime) -> str:
    """Canonical RFC 3339 UTC text, second or microsecond precision."""
    dt = dt.astimezone(timezone.utc)
    if dt.microsecond:
        return dt.strftime("%Y-%m-%dT%H:%M:%S.%f") + "Z"
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def utc_from_epoch(seconds: float) -> datetime:
    return datetime.fromtimestamp(seconds, tz=timezone.utc)


def dumps(obj: Any) -> str:
    """Stable serialization: sorted keys, no NaN/Infinity in the output."""
    return json.dumps(obj, sort_keys=True, allow_nan=False)


def write_document(path: str | Path, obj: dict[str, Any]) -> None:
    Path(path).write_text(dumps(obj) + "\n", encoding="utf-8")


def read_document(path: str | Path, expected_format: str | None = None) -> dict[str, Any]:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"cannot read {path}: {exc}") from exc
    if not isinstance(obj, dict):
        raise FormatError(f"{path}: expected a JSON object")
    if expected_format is not None and obj.get("format") != expected_format:
        raise FormatError(
            f"{path}: expected format {expected_format!r}, got {obj.get('format')!r}"
        )
    return obj


def load_json(obj_or_text: str | dict[str, Any], expected_format: str | None = None) -> dict[str, Any]:
    """Same checks as :func:`read_document` for already-loaded/in-memory data."""
    if isinstance(obj_or_text, str):
        try:
            obj = json.loads(obj_or_text)
        except json.JSONDecodeError as exc:
            raise FormatError(f"bad JSON: {exc}") from exc
    else:
        obj = obj_or_text
    if not isinstance(obj, dict):
        raise FormatError("expected a JSON object")
    if expected_format is not None and obj.get("format") != expected_format:
        raise FormatError(f"expected format {expected_format!r}, got {obj.get('format')!r}")
    return obj
