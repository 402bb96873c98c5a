"""Operator command line: run the service, analyze traces offline, generate
trace fixtures, and print journal reports.

Exit codes are fixed at 0 (success / no fault), 1 (``analyze`` found a
fault), and 2 (usage, config, or parse error) so the commands compose in
shell scripts and CI.
"""

from __future__ import annotations

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Optional, Sequence

from .analysis import (
    AnalysisError,
    DetectedEvent,
    FaultDiagnosis,
    TraceDiff,
    compare_baseline,
    detect_events,
    diagnose_fault,
    find_fiber_end,
)
from .fiber import (
    FiberEventSpec,
    FiberRoute,
    IncidentSpec,
    OtdrParams,
    OtdrTrace,
    SimulationError,
    apply_incident,
    synthesize_trace,
)
from .maintenance import MaintenanceError
from .serde import (
    FORMAT_ROUTE,
    FORMAT_TRACE,
    FormatError,
    dumps,
    format_rfc3339,
    read_document,
)
from .service import (
    AlertStore,
    ConfigError,
    MonitorService,
    load_monitor_config,
    resolve_config_path,
)
from .service.api import create_server, serve_in_thread

# fixed capture instant so `simulate --seed N` is byte-reproducible
_SIMULATE_T0 = datetime(2024, 1, 1, tzinfo=timezone.utc)

_INCIDENT_ALIASES = {
    "cut": "fiber_cut",
    "bend": "fiber_bend",
    "degrade": "connector_degradation",
    "sensor": "sensor_trigger",
}


def _fail(message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return 2


# -- serve --------------------------------------------------------------------


def cmd_serve(args: argparse.Namespace) -> int:
    try:
        path = resolve_config_path(args.config)
        config = load_monitor_config(path)
    except ConfigError as exc:
        for violation in exc.violations:
            print(f"config error: {violation}", file=sys.stderr)
        return 2
    static_dir: Optional[Path] = None
    if args.static:
        static_dir = Path(args.static)
        if not static_dir.is_dir():
            return _fail(f"static directory not found: {static_dir}")
    service = MonitorService(config)
    try:
        server = create_server(service, host=args.host, port=args.port, static_dir=static_dir)
    except OSError as exc:
        return _fail(f"cannot bind {args.host}:{args.port}: {exc}")
    serve_in_thread(server)
    print(
        f"deepalm serving {len(config.routes)} route(s), {len(config.devices)} device(s) "
        f"on http://{args.host}:{args.port}",
        flush=True,
    )
    try:
        service.serve_loop()
    except KeyboardInterrupt:
        pass
    finally:
        service.shutdown()
        server.shutdown()
        server.server_close()
        service.store.close()
    return 0


# -- analyze ------------------------------------------------------------------


def _load_trace(path: str) -> OtdrTrace:
    return OtdrTrace.from_json(read_document(path, FORMAT_TRACE))


def _surrogate_route(baseline: OtdrTrace) -> FiberRoute:
    """A stand-in route for diagnosis when no route file is given: known
    event positions come from the baseline's ground truth when present,
    otherwise from what detection finds on the baseline itself."""
    if baseline.ground_truth is not None:
        events = baseline.ground_truth
    else:
        detected = detect_events(baseline)
        kinds = {"reflective": "connector", "loss": "splice"}
        events = tuple(
            FiberEventSpec(
                position_m=ev.position_m,
                kind=kinds[ev.kind],
                loss_db=ev.loss_db,
                reflectance_db=ev.reflectance_db,
            )
            for ev in detected
            if ev.kind in kinds
        )
    length = max(baseline.span_m, max((ev.position_m for ev in events), default=0.0)) + 1.0
    return FiberRoute(
        route_id=baseline.route_id,
        length_m=length,
        attenuation_db_per_km=0.2,
        waypoints=((0.0, 0.0, 0.0), (0.0, 0.5, length)),
        baseline_events=events,
    )


def _print_events(trace: OtdrTrace, events: list[DetectedEvent]) -> None:
    print(f"route {trace.route_id}, captured {format_rfc3339(trace.captured_at)}")
    print(f"fiber end at {find_fiber_end(trace):.1f} m, {len(events)} event(s)")
    if not events:
        return
    print(f"{'position_m':>12}  {'kind':<12}{'loss_db':>9}  {'reflectance':>12}  {'conf':>5}")
    for ev in events:
        refl = f"{ev.reflectance_db:.1f}" if ev.reflectance_db is not None else "-"
        print(
            f"{ev.position_m:>12.1f}  {ev.kind:<12}{ev.loss_db:>9.2f}  "
            f"{refl:>12}  {ev.confidence:>5.2f}"
        )


def _print_diff(diff: TraceDiff, diagnosis: FaultDiagnosis) -> None:
    print()
    print(
        f"vs baseline: end shift {diff.end_shift_m:+.1f} m, "
        f"{len(diff.new_events)} new, {len(diff.vanished_events)} vanished, "
        f"{len(diff.changed_events)} changed"
    )
    for ev in diff.new_events:
        print(f"  new      {ev.kind:<11} at {ev.position_m:>10.1f} m, {ev.loss_db:.2f} dB")
    for ev in diff.vanished_events:
        print(f"  vanished {ev.kind:<11} at {ev.position_m:>10.1f} m")
    for before, after in diff.changed_events:
        print(
            f"  changed  {before.kind:<11} at {before.position_m:>10.1f} m, "
            f"{before.loss_db:.2f} -> {after.loss_db:.2f} dB"
        )
    where = f" at {diagnosis.position_m:.1f} m" if diagnosis.position_m is not None else ""
    print(f"diagnosis: {diagnosis.fault_kind}{where} [{diagnosis.severity}]")
    print(f"  {diagnosis.evidence}")
    print(f"  action: {diagnosis.recommended_action}")


def cmd_analyze(args: argparse.Namespace) -> int:
    try:
        trace = _load_trace(args.trace)
        events = detect_events(trace)
        diff = diagnosis = None
        if args.baseline:
            baseline = _load_trace(args.baseline)
            diff = compare_baseline(trace, baseline)
            if args.route:
                route = FiberRoute.from_json(read_document(args.route, FORMAT_ROUTE))
            else:
                route = _surrogate_route(baseline)
            diagnosis = diagnose_fault(diff, route)
    except (FormatError, SimulationError, AnalysisError) as exc:
        return _fail(str(exc))
    if args.json:
        doc: dict[str, Any] = {"events": [ev.to_json() for ev in events]}
        if diff is not None and diagnosis is not None:
            doc["diff"] = diff.to_json()
            doc["diagnosis"] = diagnosis.to_json()
        print(dumps(doc))
    else:
        _print_events(trace, events)
        if diff is not None and diagnosis is not None:
            _print_diff(diff, diagnosis)
    return 1 if diagnosis is not None and diagnosis.fault_kind != "none" else 0


# -- simulate -------------------------------------------------------------------


def _parse_incident(spec: str, route: FiberRoute) -> IncidentSpec:
    parts = spec.split(":")
    if len(parts) not in (2, 3):
        raise SimulationError(f"incident must be KIND:POS[:MAG], got {spec!r}")
    kind = _INCIDENT_ALIASES.get(parts[0], parts[0])
    try:
        position = float(parts[1])
        magnitude = float(parts[2]) if len(parts) == 3 else 1.0
    except ValueError as exc:
        raise SimulationError(f"bad incident numbers in {spec!r}") from exc
    return IncidentSpec(
        incident_id="cli",
        kind=kind,
        magnitude=magnitude,
        route_id=route.route_id,
        position_m=position,
    )


def cmd_simulate(args: argparse.Namespace) -> int:
    try:
        route = FiberRoute.from_json(read_document(args.route, FORMAT_ROUTE))
        events = route.baseline_events
        if args.incident:
            events = apply_incident(route, _parse_incident(args.incident, route))
        params = OtdrParams(seed=args.seed)
        trace = synthesize_trace(route, events, params, captured_at=_SIMULATE_T0)
    except (FormatError, SimulationError) as exc:
        return _fail(str(exc))
    text = dumps(trace.to_json()) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


# -- report ---------------------------------------------------------------------


def cmd_report(args: argparse.Namespace) -> int:
    try:
        path = resolve_config_path(args.config)
        config = load_monitor_config(path)
    except ConfigError as exc:
        for violation in exc.violations:
            print(f"config error: {violation}", file=sys.stderr)
        return 2
    journal = Path(config.persistence_path)
    alerts = []
    if journal.exists():
        store = AlertStore(journal, seed=1)
        alerts = store.list_alerts()
        store.close()
    by_status: dict[str, int] = {}
    for alert in alerts:
        by_status[alert.status] = by_status.get(alert.status, 0) + 1
    hardware = [a for a in alerts if a.source_domain == "hardware"]
    if args.json:
        print(
            dumps(
                {
                    "journal": str(journal),
                    "counts": by_status,
                    "alerts": [a.to_json() for a in alerts],
                }
            )
        )
        return 0
    print(f"journal: {journal}")
    if not alerts:
        print("no alerts recorded")
        return 0
    counts = ", ".join(f"{n} {s}" for s, n in sorted(by_status.items()))
    print(f"{len(alerts)} alert(s): {counts}")
    print(f"{'status':<13}{'severity':<10}{'domain':<10}{'kind':<22}{'target':<16}{'n':>3}  summary")
    for a in alerts:
        print(
            f"{a.status:<13}{a.severity:<10}{a.source_domain:<10}{a.kind:<22}"
            f"{a.route_or_device:<16}{a.occurrence_count:>3}  {a.summary}"
        )
    if hardware:
        print("device health (from hardware alerts):")
        for a in hardware:
            print(f"  {a.route_or_device}: {a.summary} [{a.status}]")
    return 0


# -- entry point ------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="deepalm",
        description="Holistic optical-network monitoring: fiber, hardware, and log analytics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_serve = sub.add_parser("serve", help="run the monitoring service and HTTP API")
    p_serve.add_argument("--config", help="config file (falls back to $DEEPALM_CONFIG)")
    p_serve.add_argument("--host", default="127.0.0.1", help="bind address (default 127.0.0.1)")
    p_serve.add_argument("--port", type=int, default=8080, help="TCP port (default 8080)")
    p_serve.add_argument("--static", help="directory of dashboard assets to serve at /")
    p_serve.set_defaults(func=cmd_serve)

    p_analyze = sub.add_parser("analyze", help="detect events on a trace file")
    p_analyze.add_argument("trace", help="trace JSON file (deepalm-trace/1)")
    p_analyze.add_argument("--baseline", help="baseline trace to diff against")
    p_analyze.add_argument("--route", help="route file for fault diagnosis context")
    p_analyze.add_argument("--json", action="store_true", help="machine-readable output")
    p_analyze.set_defaults(func=cmd_analyze)

    p_sim = sub.add_parser("simulate", help="synthesize a trace from a route file")
    p_sim.add_argument("--route", required=True, help="route JSON file (deepalm-route/1)")
    p_sim.add_argument(
        "--incident",
        help="apply KIND:POS[:MAG] before rendering (e.g. cut:12345, bend:8000:1.5)",
    )
    p_sim.add_argument("--seed", type=int, default=1, help="noise seed (default 1)")
    p_sim.add_argument("-o", "--out", help="output path (default: standard output)")
    p_sim.set_defaults(func=cmd_simulate)

    p_report = sub.add_parser("report", help="summarize the alert journal")
    p_report.add_argument("--config", help="config file (falls back to $DEEPALM_CONFIG)")
    p_report.add_argument("--json", action="store_true", help="machine-readable output")
    p_report.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help and 2 for usage errors; pass both through
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (FormatError, SimulationError, AnalysisError, MaintenanceError, ConfigError) as exc:
        return _fail(str(exc))


if __name__ == "__main__":
    sys.exit(main())
