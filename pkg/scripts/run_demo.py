#!/usr/bin/env python3
"""Run the scripted demo scenario on simulated time and narrate the outcome.

Uses fixtures/config.json + fixtures/scenario.json: one fiber cut, one
login burst, one device overheat, all injected into an otherwise quiet
network. The journal goes to a temporary directory; fixtures/ stays clean.
"""

from __future__ import annotations

import sys
import tempfile
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from deepalm.geo import route_to_geojson
from deepalm.serde import read_document, FORMAT_SCENARIO
from deepalm.service import load_monitor_config, run_scenario


def main() -> None:
    config = load_monitor_config(ROOT / "fixtures" / "config.json")
    scenario = read_document(ROOT / "fixtures" / "scenario.json", FORMAT_SCENARIO)
    with tempfile.TemporaryDirectory() as tmp:
        service = run_scenario(config, scenario, store_path=Path(tmp) / "alerts.journal")
        alerts = service.store.list_alerts()
        print(f"scenario finished: {len(alerts)} alert(s)\n")
        for a in alerts:
            pos = f" @ {a.position_m:.0f} m" if a.position_m is not None else ""
            geo = (
                f" ({a.geo.latitude_deg:.4f}, {a.geo.longitude_deg:.4f})"
                if a.geo is not None
                else ""
            )
            print(f"[{a.severity:>8}] {a.source_domain}/{a.kind}{pos}{geo}")
            print(f"           {a.route_or_device}: {a.summary}")
            print(f"           seen x{a.occurrence_count}, tags: {', '.join(a.tags) or '-'}")
        collection, warnings = route_to_geojson(list(service.routes.values()), alerts)
        pins = [f for f in collection["features"] if f["geometry"]["type"] == "Point"]
        print(f"\nmap: {len(collection['features'])} feature(s), {len(pins)} alert pin(s)")
        for w in warnings:
            print(f"  warning: {w}")
        service.store.close()


if __name__ == "__main__":
    main()
