"""The unified alert store: one record type for all three domains, a strict
status state machine, deduplication, and an append-only JSONL journal that
fully reconstructs the store on replay.

Concurrency contract: a single logical writer — every mutation passes
through the store lock; listeners are notified after the journal line is
flushed, never before.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field, replace
from datetime import datetime
from pathlib import Path
from typing import Any, Callable, Optional

from ..geo import GeoPoint
from ..prng import Xorshift64Star
from ..serde import dumps, format_rfc3339, parse_rfc3339
from .clock import Clock, WallClock

SOURCE_DOMAINS = ("fiber", "hardware", "security")
ALERT_SEVERITIES = ("critical", "major", "minor", "info")
ALERT_STATUSES = ("open", "acknowledged", "resolved")

# action → (allowed prior statuses, resulting status)
_TRANSITIONS = {
    "acknowledge": (("open",), "acknowledged"),
    "resolve": (("open", "acknowledged"), "resolved"),
}

_CROCKFORD = "0123456789ABCDEFGHJKMNPQRSTVWXYZ"


class AlertError(ValueError):
    """Malformed alert record."""


class UnknownAlertError(KeyError):
    def __init__(self, alert_id: str):
        super().__init__(alert_id)
        self.alert_id = alert_id

    def __str__(self) -> str:
        return f"unknown alert {self.alert_id!r}"


class IllegalTransitionError(ValueError):
    pass


@dataclass(frozen=True)
class Alert:
    """One operator-facing incident record, whatever the source domain."""

    alert_id: str
    source_domain: str
    kind: str
    severity: str
    route_or_device: str
    summary: str
    created_at: datetime
    updated_at: datetime
    position_m: Optional[float] = None
    geo: Optional[GeoPoint] = None
    status: str = "open"
    occurrence_count: int = 1
    tags: tuple[str, ...] = ()
    evidence: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.source_domain not in SOURCE_DOMAINS:
            raise AlertError(f"source_domain must be one of {SOURCE_DOMAINS}")
        if self.severity not in ALERT_SEVERITIES:
            raise AlertError(f"severity must be one of {ALERT_SEVERITIES}")
        if self.status not in ALERT_STATUSES:
            raise AlertError(f"status must be one of {ALERT_STATUSES}")
        if self.occurrence_count < 1:
            raise AlertError("occurrence_count must be >= 1")
        if self.source_domain == "fiber" and self.position_m is not None and self.geo is None:
            raise AlertError("fiber alerts with a position must carry geo")

    def to_json(self) -> dict[str, Any]:
        return {
            "alert_id": self.alert_id,
            "source_domain": self.source_domain,
            "kind": self.kind,
            "severity": self.severity,
            "route_or_device": self.route_or_device,
            "position_m": self.position_m,
            "geo": self.geo.to_json() if self.geo else None,
            "summary": self.summary,
            "status": self.status,
            "occurrence_count": self.occurrence_count,
            "created_at": format_rfc3339(self.created_at),
            "updated_at": format_rfc3339(self.updated_at),
            "tags": list(self.tags),
            "evidence": self.evidence,
        }

    @staticmethod
    def from_json(doc: dict[str, Any]) -> "Alert":
        return Alert(
            alert_id=str(doc["alert_id"]),
            source_domain=str(doc["source_domain"]),
            kind=str(doc["kind"]),
            severity=str(doc["severity"]),
            route_or_device=str(doc["route_or_device"]),
            position_m=(
                float(doc["position_m"]) if doc.get("position_m") is not None else None
            ),
            geo=GeoPoint.from_json(doc["geo"]) if doc.get("geo") else None,
            summary=str(doc["summary"]),
            status=str(doc.get("status", "open")),
            occurrence_count=int(doc.get("occurrence_count", 1)),
            created_at=parse_rfc3339(doc["created_at"]),
            updated_at=parse_rfc3339(doc["updated_at"]),
            tags=tuple(str(t) for t in doc.get("tags", ())),
            evidence=dict(doc.get("evidence", {})),
        )


def _encode_ulid(ms: int, randomness: int) -> str:
    value = (ms & ((1 << 48) - 1)) << 80 | (randomness & ((1 << 80) - 1))
    chars = []
    for shift in range(125, -1, -5):
        chars.append(_CROCKFORD[(value >> shift) & 0x1F])
    return "".join(chars)


class AlertStore:
    """In-memory alert map backed by an append-only JSONL journal.

    Journal entry shapes::

        {"op": "insert", "alert": {...}}
        {"op": "merge", "alert_id": id, "at": ts}
        {"op": "transition", "alert_id": id, "action": a, "tag": t?, "at": ts}
    """

    def __init__(self, path: Optional[Path], clock: Optional[Clock] = None, seed: int = 1):
        self._path = Path(path) if path is not None else None
        self._clock = clock if clock is not None else WallClock()
        self._lock = threading.RLock()
        self._alerts: dict[str, Alert] = {}
        self._listeners: list[Callable[[int, dict[str, Any]], None]] = []
        self._seq = 0
        self._rng = Xorshift64Star(seed)
        self._last_ulid: tuple[int, int] = (-1, 0)
        self._fh = None
        if self._path is not None and self._path.exists():
            self._replay()
        if self._path is not None:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._fh = open(self._path, "a", encoding="utf-8")

    # -- id generation ----------------------------------------------------

    def _new_id(self) -> str:
        ms = int(self._clock.now().timestamp() * 1000)
        rand = (self._rng.next_u64() << 16 | (self._rng.next_u64() & 0xFFFF)) & ((1 << 80) - 1)
        last_ms, last_rand = self._last_ulid
        if ms <= last_ms:
            # keep ids sortable within one millisecond
            ms, rand = last_ms, (last_rand + 1) & ((1 << 80) - 1)
        self._last_ulid = (ms, rand)
        return _encode_ulid(ms, rand)

    # -- journal ----------------------------------------------------------

    def _append(self, entry: dict[str, Any]) -> int:
        if self._fh is not None:
            self._fh.write(dumps(entry) + "\n")
            self._fh.flush()
        self._seq += 1
        seq = self._seq
        for listener in list(self._listeners):
            listener(seq, entry)
        return seq

    def _replay(self) -> None:
        assert self._path is not None
        with open(self._path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                self._apply(json.loads(line))
                self._seq += 1

    def _apply(self, entry: dict[str, Any]) -> None:
        op = entry["op"]
        if op == "insert":
            alert = Alert.from_json(entry["alert"])
            self._alerts[alert.alert_id] = alert
        elif op == "merge":
            alert = self._alerts[entry["alert_id"]]
            self._alerts[alert.alert_id] = replace(
                alert,
                occurrence_count=alert.occurrence_count + 1,
                updated_at=parse_rfc3339(entry["at"]),
            )
        elif op == "transition":
            alert = self._alerts[entry["alert_id"]]
            _, new_status = _TRANSITIONS[entry["action"]]
            tags = alert.tags
            if entry.get("tag"):
                tags = tags + (entry["tag"],)
            self._alerts[alert.alert_id] = replace(
                alert, status=new_status, tags=tags, updated_at=parse_rfc3339(entry["at"])
            )
        else:
            raise AlertError(f"unknown journal op {op!r}")

    # -- queries ----------------------------------------------------------

    def get(self, alert_id: str) -> Alert:
        with self._lock:
            try:
                return self._alerts[alert_id]
            except KeyError:
                raise UnknownAlertError(alert_id) from None

    def list_alerts(
        self, status: Optional[str] = None, domain: Optional[str] = None
    ) -> list[Alert]:
        with self._lock:
            alerts = [
                a
                for a in self._alerts.values()
                if (status is None or a.status == status)
                and (domain is None or a.source_domain == domain)
            ]
        alerts.sort(key=lambda a: (a.created_at, a.alert_id))
        return alerts

    def subscribe(self, listener: Callable[[int, dict[str, Any]], None]) -> Callable[[], None]:
        """Register a journal listener; returns the unsubscribe callable."""
        with self._lock:
            self._listeners.append(listener)

        def unsubscribe() -> None:
            with self._lock:
                if listener in self._listeners:
                    self._listeners.remove(listener)

        return unsubscribe

    # -- mutations ---------------------------------------------------------

    def dedup_or_insert(
        self,
        candidate: Alert,
        window_s: float,
        position_tolerance_m: float = 30.0,
    ) -> tuple[str, Alert]:
        """Returns ("merged", alert) when an open/acknowledged alert with the
        same (source_domain, kind, route_or_device) — and, for fiber alerts
        with positions, within ``position_tolerance_m`` — was updated within
        ``window_s``; otherwise inserts and returns ("inserted", alert)."""
        now = self._clock.now()
        with self._lock:
            for existing in self._alerts.values():
                if existing.status == "resolved":
                    continue
                if (
                    existing.source_domain != candidate.source_domain
                    or existing.kind != candidate.kind
                    or existing.route_or_device != candidate.route_or_device
                ):
                    continue
                if (now - existing.updated_at).total_seconds() > window_s:
                    continue
                if (
                    candidate.source_domain == "fiber"
                    and existing.position_m is not None
                    and candidate.position_m is not None
                    and abs(existing.position_m - candidate.position_m) > position_tolerance_m
                ):
                    continue
                merged = replace(
                    existing,
                    occurrence_count=existing.occurrence_count + 1,
                    updated_at=now,
                )
                self._alerts[merged.alert_id] = merged
                self._append(
                    {"op": "merge", "alert_id": merged.alert_id, "at": format_rfc3339(now)}
                )
                return "merged", merged

            alert = replace(
                candidate,
                alert_id=self._new_id(),
                status="open",
                occurrence_count=1,
                created_at=now,
                updated_at=now,
            )
            self._alerts[alert.alert_id] = alert
            self._append({"op": "insert", "alert": alert.to_json()})
            return "inserted", alert

    def transition(self, alert_id: str, action: str, tag: Optional[str] = None) -> Alert:
        if action not in _TRANSITIONS:
            raise IllegalTransitionError(f"unknown action {action!r}")
        now = self._clock.now()
        with self._lock:
            alert = self.get(alert_id)
            allowed_from, new_status = _TRANSITIONS[action]
            if alert.status not in allowed_from:
                raise IllegalTransitionError(
                    f"illegal transition: cannot {action} a {alert.status} alert"
                )
            tags = alert.tags + (tag,) if tag else alert.tags
            updated = replace(alert, status=new_status, tags=tags, updated_at=now)
            self._alerts[alert_id] = updated
            entry: dict[str, Any] = {
                "op": "transition",
                "alert_id": alert_id,
                "action": action,
                "at": format_rfc3339(now),
            }
            if tag:
                entry["tag"] = tag
            self._append(entry)
            return updated

    def close(self) -> None:
        with self._lock:
            if self._fh is not None:
                self._fh.close()
                self._fh = None
