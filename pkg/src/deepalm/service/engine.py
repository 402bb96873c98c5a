"""The monitoring service core: scheduled simulated measurements, the three
analysis engines, the unified alert pipeline, and incident injection.

All state mutation is serialized through one lock (single logical writer);
the analysis calls themselves are pure. Time comes from an injected clock so
acceptance scenarios run deterministically on simulated time.
"""

from __future__ import annotations

import math
import threading
import zlib
from dataclasses import dataclass, replace
from datetime import datetime, timedelta
from pathlib import Path
from typing import Any, Callable, Optional

from ..analysis import compare_baseline, detect_events, diagnose_fault
from ..fiber import (
    FIBER_INCIDENT_KINDS,
    FiberRoute,
    IncidentSpec,
    OtdrTrace,
    SimulationError,
    apply_incident,
    synthesize_trace,
)
from ..geo import GeoError, locate_on_route
from ..maintenance import DeviceProfile, RulEstimate, TelemetrySeries, estimate_rul, maintenance_flag
from ..prng import Xorshift64Star
from ..serde import FORMAT_SCENARIO, format_rfc3339, load_json, parse_rfc3339
from ..siem import LogRecord, SecurityEvent, apply_rules, generate_log_stream, score_log_rate
from .alerts import Alert, AlertStore, _encode_ulid
from .clock import Clock, SimClock, WallClock
from .config import MonitorConfig

DEMO_TAG = "injected-by-demo"

_SEVERITY_BY_FLAG = {"critical": "critical", "plan_maintenance": "minor"}


def _slope_is_significant(estimate: RulEstimate, step_s: float, window: int) -> bool:
    """True when the fitted slope stands out from the fit's own noise.

    Guards the alert path against noise-driven slopes on short, closely
    spaced telemetry windows (a clean trend has zero residual and always
    passes). se(slope) = s / sqrt(sum((t - tbar)^2)) with the dof-corrected
    residual scale.
    """
    if window <= 2 or estimate.fit_residual_std == 0.0:
        return True
    step_h = step_s / 3600.0
    sxx = step_h * step_h * window * (window * window - 1) / 12.0
    resid_scale = estimate.fit_residual_std * math.sqrt(window / (window - 2))
    se = resid_scale / math.sqrt(sxx)
    return abs(estimate.slope_per_hour) > 4.0 * se


class UnknownTargetError(KeyError):
    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def __str__(self) -> str:
        return self.message


class IngestError(ValueError):
    pass


@dataclass
class _Task:
    due: datetime
    interval_s: float
    order: int
    run: Callable[[datetime], None]


class MonitorService:
    def __init__(
        self,
        config: MonitorConfig,
        clock: Optional[Clock] = None,
        store: Optional[AlertStore] = None,
    ):
        self.config = config
        self.clock: Clock = clock if clock is not None else WallClock()
        self.store = store if store is not None else AlertStore(
            Path(config.persistence_path), self.clock
        )
        self._lock = threading.RLock()
        self.routes: dict[str, FiberRoute] = {r.route_id: r for r in config.routes}
        self.profiles: dict[str, DeviceProfile] = {d.device_id: d for d in config.devices}
        self._current_events = {
            rid: tuple(r.baseline_events) for rid, r in self.routes.items()
        }
        self._baselines: dict[str, OtdrTrace] = {}
        self._latest_trace: dict[str, OtdrTrace] = {}
        self._latest_events: dict[str, list] = {}
        self._scan_rng = {
            rid: Xorshift64Star(config.otdr_params.seed ^ zlib.crc32(rid.encode()))
            for rid in self.routes
        }
        # incremental telemetry stream per device
        self._telem_rng = {d: Xorshift64Star(p.seed) for d, p in self.profiles.items()}
        self._telem_level: dict[str, float] = {}
        self._telem_values: dict[str, list[float]] = {d: [] for d in self.profiles}
        self._telem_t0: dict[str, datetime] = {}
        self._latest_estimate: dict[str, RulEstimate] = {}
        # continuous quiet log stream state
        self._log_rng = Xorshift64Star(config.otdr_params.seed ^ 0x10C5)
        self._log_cursor: Optional[datetime] = None
        self._pending_bursts: list[IncidentSpec] = []
        self._rate_watermark: Optional[datetime] = None
        self._pending_tags: list[tuple[str, Optional[str], str]] = []  # (domain, target, incident_id)
        self._id_rng = Xorshift64Star(config.otdr_params.seed ^ 0x1D5)
        self._tasks: list[_Task] = []
        self._task_order = 0
        self._started_at: Optional[datetime] = None
        self._stop = threading.Event()

    # -- scheduling ---------------------------------------------------------

    def _add_task(self, due: datetime, interval_s: float, run: Callable[[datetime], None]) -> None:
        self._tasks.append(_Task(due=due, interval_s=interval_s, order=self._task_order, run=run))
        self._task_order += 1

    def start(self) -> None:
        """Take baseline measurements now and schedule the periodic work."""
        now = self.clock.now()
        with self._lock:
            if self._started_at is not None:
                return
            self._started_at = now
            for rid in sorted(self.routes):
                self._scan_route(rid, now)
                self._add_task(
                    now + timedelta(seconds=self.config.scan_interval_s),
                    self.config.scan_interval_s,
                    lambda at, rid=rid: self._scan_route(rid, at),
                )
            for did in sorted(self.profiles):
                self._sample_device(did, now)
                self._add_task(
                    now + timedelta(seconds=self.config.telemetry_interval_s),
                    self.config.telemetry_interval_s,
                    lambda at, did=did: self._sample_device(did, at),
                )
            self._log_cursor = now
            self._add_task(
                now + timedelta(seconds=self.config.log_poll_interval_s),
                self.config.log_poll_interval_s,
                lambda at: self._poll_logs(at),
            )

    def run_until(self, deadline: datetime) -> None:
        """Advance simulated time, executing every task due up to ``deadline``
        in due order. Requires a SimClock."""
        clock = self.clock
        if not isinstance(clock, SimClock):
            raise IngestError("run_until requires a SimClock")
        while True:
            with self._lock:
                pending = [t for t in self._tasks if t.due <= deadline]
                if not pending:
                    break
                task = min(pending, key=lambda t: (t.due, t.order))
                if task.due > clock.now():
                    clock.set(task.due)
                at = task.due
                task.due = at + timedelta(seconds=task.interval_s)
            task.run(at)
        if deadline > clock.now():
            clock.set(deadline)

    def run_pending(self) -> None:
        """Execute every task whose due time has passed (wall-clock mode)."""
        while True:
            now = self.clock.now()
            with self._lock:
                pending = [t for t in self._tasks if t.due <= now]
                if not pending:
                    return
                task = min(pending, key=lambda t: (t.due, t.order))
                at = task.due
                task.due = at + timedelta(seconds=task.interval_s)
            task.run(at)

    def serve_loop(self) -> None:
        """Blocking scheduler loop for wall-clock operation."""
        self.start()
        while not self._stop.is_set():
            self.run_pending()
            with self._lock:
                if not self._tasks:
                    wait = 1.0
                else:
                    nxt = min(t.due for t in self._tasks)
                    wait = max(0.05, (nxt - self.clock.now()).total_seconds())
            self._stop.wait(min(wait, 1.0))

    def shutdown(self) -> None:
        self._stop.set()

    # -- scheduled bodies ----------------------------------------------------

    def _scan_route(self, route_id: str, at: datetime) -> None:
        with self._lock:
            route = self.routes[route_id]
            params = replace(
                self.config.otdr_params, seed=self._scan_rng[route_id].next_u64()
            )
            events = self._current_events[route_id]
        trace = synthesize_trace(route, events, params, captured_at=at)
        self.ingest_trace(trace)

    def _sample_device(self, device_id: str, at: datetime) -> None:
        profile = self.profiles[device_id]
        step_h = self.config.telemetry_interval_s / 3600.0
        with self._lock:
            if device_id not in self._telem_t0:
                self._telem_t0[device_id] = at
                self._telem_level[device_id] = profile.nominal
            else:
                self._telem_level[device_id] += profile.drift_per_hour * step_h
            value = self._telem_level[device_id]
            if profile.noise_std > 0:
                value += self._telem_rng[device_id].gaussian(0.0, profile.noise_std)
            self._telem_values[device_id].append(value)
            values = self._telem_values[device_id]
            keep = max(4 * self.config.rul_window, 240)
            if len(values) > keep:
                del values[: len(values) - keep]
                self._telem_t0[device_id] = at - timedelta(
                    seconds=(len(values) - 1) * self.config.telemetry_interval_s
                )
            # warm-up: a short buffer makes noise slopes explode (tiny time
            # span in the denominator), so wait for one full fit window
            if len(values) < max(2, self.config.rul_window):
                return
            series = TelemetrySeries(
                device_id=device_id,
                metric_name=profile.metric_name,
                t0=self._telem_t0[device_id],
                step_s=self.config.telemetry_interval_s,
                values=tuple(values),
            )
        self.ingest_telemetry(series)

    def _poll_logs(self, at: datetime) -> None:
        with self._lock:
            cursor = self._log_cursor
            assert cursor is not None
            span = (at - cursor).total_seconds()
            if span <= 0:
                return
            records: list[LogRecord] = []
            if self.config.log_rate_per_min > 0:
                records.extend(
                    generate_log_stream(
                        None,
                        span,
                        self._log_rng.next_u64(),
                        rate_per_min=self.config.log_rate_per_min,
                        start=cursor,
                        host=self.config.log_source,
                    )
                )
            due = [b for b in self._pending_bursts if b.injected_at <= at]
            self._pending_bursts = [b for b in self._pending_bursts if b.injected_at > at]
            for burst in due:
                records.extend(
                    generate_log_stream(
                        burst,
                        60.0,
                        self._log_rng.next_u64(),
                        rate_per_min=0.0,
                        start=burst.injected_at,
                        host=self.config.log_source,
                    )
                )
            self._log_cursor = at
            records.sort(key=lambda r: r.timestamp)
        if records:
            self.ingest_logs(records)

    # -- ingest operations ----------------------------------------------------

    def ingest_trace(self, trace: OtdrTrace) -> list[Alert]:
        """Analyze one trace against the route baseline; returns alerts newly
        inserted (merged duplicates return nothing)."""
        with self._lock:
            route = self.routes.get(trace.route_id)
            if route is None:
                raise UnknownTargetError(f"unknown route {trace.route_id!r}")
            last = self._latest_trace.get(trace.route_id)
            if last is not None and trace.captured_at < last.captured_at:
                raise IngestError(
                    f"trace for {trace.route_id!r} out of captured_at order"
                )
            self._latest_trace[trace.route_id] = trace
            self._latest_events[trace.route_id] = detect_events(
                trace,
                self.config.otdr_detector,
                self.config.min_loss_db,
                self.config.min_peak_db,
            )
            baseline = self._baselines.get(trace.route_id)
            if baseline is None:
                self._baselines[trace.route_id] = trace
                return []

            diff = compare_baseline(
                trace,
                baseline,
                self.config.loss_tolerance_db,
                None,
                self.config.otdr_detector,
                self.config.min_loss_db,
                self.config.min_peak_db,
            )
            diagnosis = diagnose_fault(diff, route)
            if diagnosis.fault_kind == "none":
                return []
            position = diagnosis.position_m
            geo = None
            if position is not None:
                try:
                    geo = locate_on_route(
                        route, min(max(position, 0.0), route.length_m)
                    )
                except GeoError:
                    geo = None
            candidate = Alert(
                alert_id="",
                source_domain="fiber",
                kind=diagnosis.fault_kind,
                severity=diagnosis.severity,
                route_or_device=trace.route_id,
                position_m=position,
                geo=geo,
                summary=diagnosis.evidence,
                created_at=trace.captured_at,
                updated_at=trace.captured_at,
                tags=self._take_tags("fiber", trace.route_id),
                evidence={
                    "trace_captured_at": format_rfc3339(trace.captured_at),
                    "baseline_captured_at": format_rfc3339(baseline.captured_at),
                    "recommended_action": diagnosis.recommended_action,
                },
            )
            outcome, alert = self.store.dedup_or_insert(
                candidate,
                self.config.dedup_window_s,
                3.0 * trace.params.sample_spacing_m,
            )
            return [alert] if outcome == "inserted" else []

    def ingest_telemetry(self, series: TelemetrySeries) -> list[Alert]:
        with self._lock:
            profile = self.profiles.get(series.device_id)
            if profile is None:
                raise UnknownTargetError(f"unknown device {series.device_id!r}")
            if len(series.values) < 2:
                return []
            window = min(self.config.rul_window, len(series.values))
            estimate = estimate_rul(series, profile, window)
            self._latest_estimate[series.device_id] = estimate
            flag = maintenance_flag(estimate, self.config.maintenance_horizon_hours)
            if flag == "ok":
                return []
            if not _slope_is_significant(estimate, series.step_s, window):
                return []
            rul_text = (
                "no failure predicted"
                if estimate.rul_hours == float("inf")
                else f"RUL {estimate.rul_hours:.1f} h"
            )
            candidate = Alert(
                alert_id="",
                source_domain="hardware",
                kind=flag,
                severity=_SEVERITY_BY_FLAG[flag],
                route_or_device=series.device_id,
                summary=(
                    f"{profile.metric_name} trending to failure: {rul_text}, "
                    f"health {estimate.health_index:.2f}"
                ),
                created_at=estimate.estimated_at,
                updated_at=estimate.estimated_at,
                tags=self._take_tags("hardware", series.device_id),
                evidence={
                    "estimated_at": format_rfc3339(estimate.estimated_at),
                    "window": window,
                    "slope_per_hour": estimate.slope_per_hour,
                },
            )
            outcome, alert = self.store.dedup_or_insert(candidate, self.config.dedup_window_s)
            return [alert] if outcome == "inserted" else []

    def ingest_logs(self, records: list[LogRecord]) -> list[Alert]:
        with self._lock:
            events: list[SecurityEvent] = list(apply_rules(records, self.config.rules))
            rate_events = score_log_rate(
                records, self.config.log_bucket_s, self.config.log_detector
            )
            for ev in rate_events:
                if self._rate_watermark is None or ev.window_end > self._rate_watermark:
                    events.append(ev)
                    self._rate_watermark = ev.window_end
            inserted = []
            for ev in events:
                candidate = Alert(
                    alert_id="",
                    source_domain="security",
                    kind=ev.rule_id,
                    severity=ev.severity,
                    route_or_device=ev.group_key or "all",
                    summary=(
                        f"{ev.count} matching records in "
                        f"{(ev.window_end - ev.window_start).total_seconds():.0f} s "
                        f"(score {ev.score:.1f})"
                    ),
                    created_at=ev.window_start,
                    updated_at=ev.window_start,
                    tags=self._take_tags("security", None),
                    evidence={
                        "window_start": format_rfc3339(ev.window_start),
                        "window_end": format_rfc3339(ev.window_end),
                        "count": ev.count,
                        "score": ev.score,
                    },
                )
                outcome, alert = self.store.dedup_or_insert(
                    candidate, self.config.dedup_window_s
                )
                if outcome == "inserted":
                    inserted.append(alert)
            return inserted

    # -- incident injection -----------------------------------------------------

    def _take_tags(self, domain: str, target: Optional[str]) -> tuple[str, ...]:
        for i, (dom, tgt, incident_id) in enumerate(self._pending_tags):
            if dom == domain and (tgt is None or tgt == target):
                del self._pending_tags[i]
                return (DEMO_TAG, f"incident:{incident_id}")
        return ()

    def inject_incident(self, spec: IncidentSpec) -> str:
        """Route an operator-injected incident to its simulator; the next
        scheduled measurement reflects it."""
        with self._lock:
            incident_id = spec.incident_id or "inc-" + _encode_ulid(
                int(self.clock.now().timestamp() * 1000), self._id_rng.next_u64() << 16
            )
            spec = replace(spec, incident_id=incident_id)
            if spec.kind in FIBER_INCIDENT_KINDS:
                route = self.routes.get(spec.route_id or "")
                if route is None:
                    raise UnknownTargetError(f"unknown route {spec.route_id!r}")
                as_built = replace(
                    route, baseline_events=self._current_events[route.route_id]
                )
                self._current_events[route.route_id] = apply_incident(as_built, spec)
                self._pending_tags.append(("fiber", route.route_id, incident_id))
            elif spec.kind == "device_overheat":
                profile = self.profiles.get(spec.device_id or "")
                if profile is None:
                    raise UnknownTargetError(f"unknown device {spec.device_id!r}")
                toward = 1.0 if profile.failure_threshold > profile.nominal else -1.0
                self.profiles[profile.device_id] = replace(
                    profile, drift_per_hour=profile.drift_per_hour + toward * spec.magnitude
                )
                self._pending_tags.append(("hardware", profile.device_id, incident_id))
            elif spec.kind == "login_burst":
                if spec.log_source != self.config.log_source:
                    raise UnknownTargetError(f"unknown log source {spec.log_source!r}")
                at = spec.injected_at
                if self._started_at is None or at < self._started_at:
                    at = self.clock.now()
                self._pending_bursts.append(replace(spec, injected_at=at))
                self._pending_tags.append(("security", None, incident_id))
            else:
                raise SimulationError(f"unknown incident kind {spec.kind!r}")
            return incident_id

    # -- views --------------------------------------------------------------

    def latest_trace(self, route_id: str) -> OtdrTrace:
        with self._lock:
            trace = self._latest_trace.get(route_id)
            if trace is None:
                raise UnknownTargetError(f"no trace for route {route_id!r}")
            return trace

    def latest_events(self, route_id: str) -> list:
        with self._lock:
            if route_id not in self.routes:
                raise UnknownTargetError(f"unknown route {route_id!r}")
            return list(self._latest_events.get(route_id, []))

    def device_health(self, device_id: str) -> RulEstimate:
        with self._lock:
            est = self._latest_estimate.get(device_id)
            if est is None:
                raise UnknownTargetError(f"no estimate for device {device_id!r}")
            return est


def run_scenario(
    config: MonitorConfig,
    scenario: dict[str, Any] | str,
    store_path: Optional[Path] = None,
) -> MonitorService:
    """Run a scripted timeline on simulated time and return the finished
    service for inspection.

    Scenario document (format deepalm-scenario/1)::

        {"format": "deepalm-scenario/1", "start": rfc3339?, "duration_s": n,
         "timeline": [{"at_s": n, "inject": IncidentSpec-doc}, ...]}
    """
    doc = load_json(scenario, FORMAT_SCENARIO)
    start = parse_rfc3339(doc.get("start", "2024-01-01T00:00:00Z"))
    duration_s = float(doc["duration_s"])
    clock = SimClock(start)
    store = AlertStore(
        store_path if store_path is not None else Path(config.persistence_path), clock
    )
    service = MonitorService(config, clock=clock, store=store)
    service.start()
    timeline = sorted(doc.get("timeline", []), key=lambda e: float(e["at_s"]))
    for entry in timeline:
        at = start + timedelta(seconds=float(entry["at_s"]))
        service.run_until(at)
        if "inject" in entry:
            service.inject_incident(IncidentSpec.from_json(entry["inject"]))
    service.run_until(start + timedelta(seconds=duration_s))
    return service
