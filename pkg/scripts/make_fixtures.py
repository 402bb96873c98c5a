#!/usr/bin/env python3
"""Regenerate the demo fixtures under fixtures/.

Everything here is deterministic; running it twice produces byte-identical
files. The traces are rendered with fixed seeds and a fixed capture time.
"""

from __future__ import annotations

import sys
from datetime import datetime, timezone
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from deepalm.fiber import FiberEventSpec, FiberRoute, IncidentSpec, OtdrParams, apply_incident, synthesize_trace
from deepalm.serde import FORMAT_CONFIG, FORMAT_RULES, FORMAT_SCENARIO, write_document

FIXTURES = ROOT / "fixtures"
T0 = datetime(2024, 1, 1, tzinfo=timezone.utc)

BERLIN_EAST = FiberRoute(
    route_id="berlin-east",
    length_m=25000.0,
    attenuation_db_per_km=0.2,
    waypoints=(
        (52.5200, 13.4050, 0.0),
        (52.4650, 13.7000, 9000.0),
        (52.4050, 14.0000, 17500.0),
        (52.3400, 14.5500, 25000.0),
    ),
    baseline_events=(
        FiberEventSpec(position_m=5000.0, kind="connector", loss_db=0.5, reflectance_db=-45.0),
        FiberEventSpec(position_m=12000.0, kind="splice", loss_db=0.6),
        FiberEventSpec(position_m=18000.0, kind="sensor_trigger", loss_db=0.0),
    ),
)

RING_SOUTH = FiberRoute(
    route_id="ring-south",
    length_m=12000.0,
    attenuation_db_per_km=0.21,
    waypoints=(
        (52.3400, 14.5500, 0.0),
        (52.3000, 14.3000, 6500.0),
        (52.2600, 14.0500, 12000.0),
    ),
    baseline_events=(
        FiberEventSpec(position_m=3000.0, kind="connector", loss_db=0.4, reflectance_db=-48.0),
        FiberEventSpec(position_m=7500.0, kind="splice", loss_db=0.5),
    ),
)

CONFIG = {
    "format": FORMAT_CONFIG,
    "routes": ["route-berlin-east.json", "route-ring-south.json"],
    "devices": [
        {
            "device_id": "amp-01",
            "metric_name": "laser_bias_ma",
            "nominal": 50.0,
            "failure_threshold": 90.0,
            "drift_per_hour": 0.0,
            "noise_std": 0.05,
            "seed": 7,
        },
        {
            "device_id": "edfa-02",
            "metric_name": "pump_current_ma",
            "nominal": 120.0,
            "failure_threshold": 180.0,
            "drift_per_hour": 0.0,
            "noise_std": 0.04,
            "seed": 11,
        },
    ],
    "rules": [
        {
            "rule_id": "brute_force_login",
            "pattern": "action=failed_login",
            "group_by": "src_ip",
            "count_threshold": 5,
            "window_s": 60.0,
            "severity": "major",
        },
        {
            "rule_id": "link_flap",
            "pattern": "Link down",
            "group_by": "host",
            "count_threshold": 3,
            "window_s": 120.0,
            "severity": "minor",
        },
    ],
    "scan_interval_s": 5.0,
    "telemetry_interval_s": 10.0,
    "log_poll_interval_s": 10.0,
    "dedup_window_s": 300.0,
    "persistence_path": "alerts.journal",
    "log_source": "fsp3000-1",
}

RULES_DOC = {"format": FORMAT_RULES, "rules": CONFIG["rules"]}

SCENARIO = {
    "format": FORMAT_SCENARIO,
    "start": "2024-01-01T00:00:00Z",
    "duration_s": 300.0,
    "timeline": [
        {
            "at_s": 60.0,
            "inject": {
                "incident_id": "demo-cut",
                "kind": "fiber_cut",
                "route_id": "berlin-east",
                "position_m": 12345.0,
                "magnitude": 0.0,
                "injected_at": "2024-01-01T00:01:00Z",
            },
        },
        {
            "at_s": 120.0,
            "inject": {
                "incident_id": "demo-burst",
                "kind": "login_burst",
                "log_source": "fsp3000-1",
                "magnitude": 20.0,
                "injected_at": "2024-01-01T00:02:00Z",
            },
        },
        {
            "at_s": 150.0,
            "inject": {
                "incident_id": "demo-overheat",
                "kind": "device_overheat",
                "device_id": "amp-01",
                "magnitude": 8.0,
                "injected_at": "2024-01-01T00:02:30Z",
            },
        },
    ],
}


def main() -> None:
    FIXTURES.mkdir(exist_ok=True)
    write_document(FIXTURES / "route-berlin-east.json", BERLIN_EAST.to_json())
    write_document(FIXTURES / "route-ring-south.json", RING_SOUTH.to_json())
    write_document(FIXTURES / "config.json", CONFIG)
    write_document(FIXTURES / "rules.json", RULES_DOC)
    write_document(FIXTURES / "scenario.json", SCENARIO)

    baseline = synthesize_trace(BERLIN_EAST, BERLIN_EAST.baseline_events, OtdrParams(seed=1), captured_at=T0)
    write_document(FIXTURES / "trace-baseline.json", baseline.to_json())

    cut = IncidentSpec(
        incident_id="demo-cut", kind="fiber_cut", route_id="berlin-east", position_m=12345.0
    )
    cut_events = apply_incident(BERLIN_EAST, cut)
    cut_trace = synthesize_trace(BERLIN_EAST, cut_events, OtdrParams(seed=2), captured_at=T0)
    write_document(FIXTURES / "trace-cut.json", cut_trace.to_json())

    for name in sorted(p.name for p in FIXTURES.glob("*.json")):
        print(f"wrote fixtures/{name}")


if __name__ == "__main__":
    main()
