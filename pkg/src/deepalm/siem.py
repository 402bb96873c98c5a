"""Equipment-log analytics: parsing, rule matching, and rate anomaly scoring.

The wire format is a single-line, RFC 5424-inspired record::

    <PRI>1 TIMESTAMP HOST FACILITY-TAG - - MESSAGE

where PRI = facility_code * 8 + severity and TIMESTAMP is RFC 3339 UTC. A
fixed pattern table lifts structured fields (user, src_ip, port, action) out
of the free-text message; everything else stays opaque.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Any, Iterable, Optional, Sequence

from .detectors import DetectorConfig, Series, ewma_baseline, threshold_events, zscore
from .fiber import IncidentSpec
from .prng import Xorshift64Star
from .serde import FORMAT_RULES, FormatError, format_rfc3339, parse_rfc3339, read_document
from .maintenance import DEFAULT_T0

SEVERITIES = ("critical", "major", "minor", "info")

RATE_DETECTOR_ID = "log_rate_z"

# message → structured fields; first matching row wins
_FIELD_PATTERNS: tuple[tuple[str, re.Pattern[str]], ...] = (
    ("failed_login", re.compile(r"Failed login for (?P<user>\S+) from (?P<src_ip>\S+)")),
    ("config_change", re.compile(r"Configuration changed by (?P<user>\S+)")),
    ("link_down", re.compile(r"Link down on port (?P<port>\S+)")),
)

_IDENTIFIER = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


class SiemError(ValueError):
    """Invalid rule, scenario, or generation parameters."""


class LogParseError(ValueError):
    """Malformed log line; ``offset`` points at the offending column."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


def extract_fields(message: str) -> dict[str, str]:
    for action, pattern in _FIELD_PATTERNS:
        m = pattern.search(message)
        if m:
            fields = {k: v for k, v in m.groupdict().items() if v is not None}
            fields["action"] = action
            return fields
    return {}


@dataclass(frozen=True, eq=True)
class LogRecord:
    """One parsed equipment log line.

    ``facility`` is the tag string on the wire; ``facility_code`` is the
    numeric syslog facility recovered from PRI.
    """

    timestamp: datetime
    host: str
    facility: str
    severity: int
    message: str
    facility_code: int = 16
    fields: dict[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not (0 <= self.severity <= 7):
            raise SiemError("severity must be 0..7")
        if not (0 <= self.facility_code <= 23):
            raise SiemError("facility_code must be 0..23")

    def to_line(self) -> str:
        pri = self.facility_code * 8 + self.severity
        return (
            f"<{pri}>1 {format_rfc3339(self.timestamp)} {self.host} "
            f"{self.facility} - - {self.message}"
        )


def parse_log_line(line: str) -> LogRecord:
    """Parse one wire-format line; raises :class:`LogParseError` with the
    offending offset on malformed input."""
    if not line.startswith("<"):
        raise LogParseError("expected '<PRI>'", 0)
    close = line.find(">")
    if close < 0:
        raise LogParseError("unterminated PRI", 0)
    pri_text = line[1:close]
    if not pri_text.isdigit():
        raise LogParseError("PRI must be numeric", 1)
    pri = int(pri_text)
    if pri > 191:
        raise LogParseError("PRI out of range", 1)
    rest_offset = close + 1
    if not line[rest_offset:].startswith("1 "):
        raise LogParseError("unsupported version", rest_offset)

    parts = line[rest_offset + 2 :].split(" ", 4)
    offsets = []
    cursor = rest_offset + 2
    for p in parts:
        offsets.append(cursor)
        cursor += len(p) + 1
    if len(parts) < 5:
        raise LogParseError("truncated record", len(line))
    ts_text, host, facility_tag, sd1, rest = parts
    try:
        timestamp = parse_rfc3339(ts_text)
    except (ValueError, FormatError):
        raise LogParseError("bad timestamp", offsets[0]) from None
    if sd1 != "-":
        raise LogParseError("expected '-' structured-data marker", offsets[3])
    sd2, _, message = rest.partition(" ")
    if sd2 != "-":
        raise LogParseError("expected '-' msgid marker", offsets[4])
    return LogRecord(
        timestamp=timestamp,
        host=host,
        facility=facility_tag,
        severity=pri % 8,
        facility_code=pri // 8,
        message=message,
        fields=extract_fields(message),
    )


@dataclass(frozen=True)
class SecurityRule:
    """Match predicate plus burst threshold over a sliding window."""

    rule_id: str
    pattern: str  # "key=value" field equality, else message substring
    group_by: str
    count_threshold: int
    window_s: float
    severity: str

    def __post_init__(self) -> None:
        if self.count_threshold < 1:
            raise SiemError("count_threshold must be >= 1")
        if self.window_s <= 0:
            raise SiemError("window_s must be > 0")
        if self.severity not in SEVERITIES:
            raise SiemError(f"severity must be one of {SEVERITIES}")

    def matches(self, record: LogRecord) -> bool:
        key, eq, value = self.pattern.partition("=")
        if eq and _IDENTIFIER.match(key):
            return record.fields.get(key) == value
        return self.pattern in record.message

    def to_json(self) -> dict[str, Any]:
        return {
            "rule_id": self.rule_id,
            "pattern": self.pattern,
            "group_by": self.group_by,
            "count_threshold": self.count_threshold,
            "window_s": self.window_s,
            "severity": self.severity,
        }

    @staticmethod
    def from_json(doc: dict[str, Any]) -> "SecurityRule":
        return SecurityRule(
            rule_id=str(doc["rule_id"]),
            pattern=str(doc["pattern"]),
            group_by=str(doc["group_by"]),
            count_threshold=int(doc["count_threshold"]),
            window_s=float(doc["window_s"]),
            severity=str(doc["severity"]),
        )


def load_rules(path: str) -> tuple[SecurityRule, ...]:
    doc = read_document(path, FORMAT_RULES)
    return tuple(SecurityRule.from_json(r) for r in doc["rules"])


@dataclass(frozen=True)
class SecurityEvent:
    """One security finding: a fired rule burst or a rate anomaly."""

    rule_id: str
    window_start: datetime
    window_end: datetime
    group_key: str
    count: int
    score: float
    severity: str

    def __post_init__(self) -> None:
        if self.window_end < self.window_start:
            raise SiemError("window_end before window_start")

    def to_json(self) -> dict[str, Any]:
        return {
            "rule_id": self.rule_id,
            "window_start": format_rfc3339(self.window_start),
            "window_end": format_rfc3339(self.window_end),
            "group_key": self.group_key,
            "count": self.count,
            "score": self.score,
            "severity": self.severity,
        }


def apply_rules(
    records: Sequence[LogRecord], rules: Sequence[SecurityRule]
) -> list[SecurityEvent]:
    """One event per (rule, group, maximal burst) whose best sliding window
    reaches the threshold; bursts are separated by match gaps >= window_s."""
    events: list[SecurityEvent] = []
    for rule in rules:
        groups: dict[str, list[datetime]] = {}
        for rec in records:
            if rule.matches(rec):
                groups.setdefault(rec.fields.get(rule.group_by, ""), []).append(rec.timestamp)
        for group_key, times in groups.items():
            times.sort()
            window = timedelta(seconds=rule.window_s)
            burst_start = 0
            for i in range(1, len(times) + 1):
                if i < len(times) and times[i] - times[i - 1] < window:
                    continue
                burst = times[burst_start:i]
                burst_start = i
                best_count = 0
                best_at = burst[0]
                j = 0
                for k in range(len(burst)):
                    while burst[k] - burst[j] >= window:
                        j += 1
                    if k - j + 1 > best_count:
                        best_count = k - j + 1
                        best_at = burst[j]
                if best_count >= rule.count_threshold:
                    events.append(
                        SecurityEvent(
                            rule_id=rule.rule_id,
                            window_start=best_at,
                            window_end=best_at + window,
                            group_key=group_key,
                            count=best_count,
                            score=best_count / rule.count_threshold,
                            severity=rule.severity,
                        )
                    )
    events.sort(key=lambda e: (e.window_start, e.rule_id, e.group_key))
    return events


def score_log_rate(
    records: Sequence[LogRecord], bucket_s: float, config: DetectorConfig
) -> list[SecurityEvent]:
    """Bucket the aggregate message rate, z-score each bucket's departure
    from the EWMA baseline, and keep threshold exceedances."""
    if bucket_s <= 0:
        raise SiemError("bucket_s must be > 0")
    if not records:
        return []
    t_first = min(r.timestamp for r in records)
    t_last = max(r.timestamp for r in records)
    n_buckets = int(math.floor((t_last - t_first).total_seconds() / bucket_s)) + 1
    counts = [0.0] * n_buckets
    for rec in records:
        counts[int((rec.timestamp - t_first).total_seconds() / bucket_s)] += 1.0

    series = Series(counts, spacing=bucket_s)
    baseline = ewma_baseline(series, config.ewma_lambda)
    residuals = [0.0] + [
        counts[t] - baseline.values[t - 1] for t in range(1, n_buckets)
    ]
    mean_r = sum(residuals) / len(residuals)
    std_r = math.sqrt(sum((r - mean_r) ** 2 for r in residuals) / len(residuals))
    if std_r <= 0.0:
        return []
    points = zscore(Series(residuals, spacing=bucket_s), mean_r, std_r)
    kept = threshold_events(points, config.z_threshold, config.min_separation)
    events = []
    for p in kept:
        start = t_first + timedelta(seconds=p.index * bucket_s)
        events.append(
            SecurityEvent(
                rule_id=RATE_DETECTOR_ID,
                window_start=start,
                window_end=start + timedelta(seconds=bucket_s),
                group_key="all",
                count=int(counts[p.index]),
                score=p.score,
                severity="minor",
            )
        )
    return events


_BENIGN_MESSAGES: tuple[tuple[str, int, str], ...] = (
    ("system", 6, "Periodic health check completed"),
    ("optical", 6, "Optical power nominal on port {n}"),
    ("ntp", 6, "Clock synchronized to upstream source"),
    ("snmp", 6, "SNMP poll answered in {n} ms"),
)

BURST_SRC_IP = "203.0.113.66"


def generate_log_stream(
    scenario: Optional[IncidentSpec],
    duration_s: float,
    seed: int,
    rate_per_min: float = 0.5,
    start: Optional[datetime] = None,
    host: str = "fsp3000-1",
) -> list[LogRecord]:
    """Quiet benign traffic with Poisson-like arrivals; a ``login_burst``
    scenario additionally injects ``magnitude`` failed logins from one
    source address spread over 60 s at ``injected_at``."""
    if duration_s <= 0:
        raise SiemError("duration_s must be > 0")
    if scenario is not None and scenario.kind != "login_burst":
        raise SiemError(f"scenario kind {scenario.kind!r} does not generate logs")
    t0 = start if start is not None else DEFAULT_T0
    rng = Xorshift64Star(seed)
    records: list[LogRecord] = []
    if rate_per_min > 0:
        rate_per_s = rate_per_min / 60.0
        t = rng.exponential(rate_per_s)
        while t < duration_s:
            tag, sev, template = _BENIGN_MESSAGES[rng.randint(len(_BENIGN_MESSAGES))]
            message = template.format(n=1 + rng.randint(8))
            records.append(
                LogRecord(
                    timestamp=t0 + timedelta(seconds=t),
                    host=host,
                    facility=tag,
                    severity=sev,
                    facility_code=16,
                    message=message,
                    fields=extract_fields(message),
                )
            )
            t += rng.exponential(rate_per_s)

    if scenario is not None:
        m = int(scenario.magnitude)
        if m < 1:
            raise SiemError("login_burst magnitude must be >= 1")
        burst_t0 = scenario.injected_at
        spacing = 60.0 / m
        for i in range(m):
            message = f"Failed login for admin from {BURST_SRC_IP}"
            records.append(
                LogRecord(
                    timestamp=burst_t0 + timedelta(seconds=i * spacing),
                    host=host,
                    facility="auth",
                    severity=4,
                    facility_code=16,
                    message=message,
                    fields=extract_fields(message),
                )
            )
    records.sort(key=lambda r: r.timestamp)
    return records


def parse_log_stream(lines: Iterable[str]) -> tuple[list[LogRecord], list[tuple[int, LogParseError]]]:
    """Parse many lines; malformed ones are collected (1-based line number,
    error) instead of silently dropped."""
    records: list[LogRecord] = []
    errors: list[tuple[int, LogParseError]] = []
    for lineno, line in enumerate(lines, start=1):
        text = line.rstrip("\n")
        if not text:
            continue
        try:
            records.append(parse_log_line(text))
        except LogParseError as exc:
            errors.append((lineno, exc))
    return records, errors
