import http.client
import json
import threading
import time
from datetime import datetime, timedelta, timezone

import pytest
import requests

from deepalm.fiber import FiberEventSpec, FiberRoute, OtdrParams
from deepalm.geo import GeoPoint
from deepalm.maintenance import DeviceProfile
from deepalm.service.alerts import Alert
from deepalm.service.api import create_server, serve_in_thread
from deepalm.service.clock import SimClock
from deepalm.service.config import MonitorConfig
from deepalm.service.engine import MonitorService
from deepalm.siem import SecurityRule

T0 = datetime(2024, 1, 1, tzinfo=timezone.utc)

SHORT = FiberRoute(
    route_id="ring",
    length_m=2_000.0,
    attenuation_db_per_km=0.2,
    waypoints=((52.5200, 13.4050, 0.0), (52.5000, 13.6000, 2_000.0)),
    baseline_events=(FiberEventSpec(800.0, "splice", 0.5),),
)

AMP = DeviceProfile(
    "amp-01", "laser_bias_ma", nominal=50.0, failure_threshold=90.0,
    drift_per_hour=0.0, noise_std=0.0, seed=7,
)


@pytest.fixture
def api(tmp_path):
    config = MonitorConfig(
        routes=(SHORT,),
        devices=(AMP,),
        rules=(SecurityRule("brute_force_login", "action=failed_login", "src_ip", 5, 60.0, "major"),),
        scan_interval_s=5.0,
        telemetry_interval_s=10.0,
        log_poll_interval_s=10.0,
        persistence_path=str(tmp_path / "alerts.journal"),
        otdr_params=OtdrParams(seed=20240101),
        rul_window=4,
    )
    clock = SimClock(T0)
    service = MonitorService(config, clock=clock)
    service.start()
    service.run_until(T0 + timedelta(seconds=60))
    server = create_server(service, "127.0.0.1", 0)
    serve_in_thread(server)
    base = f"http://127.0.0.1:{server.server_address[1]}"
    yield base, service, clock
    server.shutdown()
    server.server_close()
    service.store.close()


def make_alert(**overrides):
    base = dict(
        alert_id="",
        source_domain="fiber",
        kind="fiber_cut",
        severity="critical",
        route_or_device="ring",
        summary="cut at 1.2 km",
        created_at=T0,
        updated_at=T0,
        position_m=1_200.0,
        geo=GeoPoint(52.51, 13.52),
    )
    base.update(overrides)
    return Alert(**base)


# -- GET endpoints -------------------------------------------------------------


def test_health(api):
    base, _, _ = api
    doc = requests.get(f"{base}/api/v1/health", timeout=5).json()
    assert doc["status"] == "ok"
    assert "version" in doc


def test_routes_listing(api):
    base, _, _ = api
    doc = requests.get(f"{base}/api/v1/routes", timeout=5).json()
    assert [r["route_id"] for r in doc["routes"]] == ["ring"]
    assert doc["routes"][0]["length_m"] == 2_000.0


def test_latest_trace(api):
    base, service, _ = api
    doc = requests.get(f"{base}/api/v1/routes/ring/trace/latest", timeout=5).json()
    assert doc["route_id"] == "ring"
    assert doc["samples"] == list(service.latest_trace("ring").samples)


def test_latest_events(api):
    base, _, _ = api
    doc = requests.get(f"{base}/api/v1/routes/ring/events/latest", timeout=5).json()
    assert doc["route_id"] == "ring"
    assert len(doc["events"]) == 1
    assert doc["events"][0]["position_m"] == pytest.approx(800.0, abs=20.0)


def test_unknown_route_is_404_with_envelope(api):
    base, _, _ = api
    resp = requests.get(f"{base}/api/v1/routes/ghost/trace/latest", timeout=5)
    assert resp.status_code == 404
    err = resp.json()["error"]
    assert err["code"] == "not_found"
    assert "ghost" in err["message"]


def test_device_health(api):
    base, _, _ = api
    doc = requests.get(f"{base}/api/v1/devices/amp-01/health", timeout=5).json()
    assert doc["device_id"] == "amp-01"
    assert doc["rul_hours"] is None  # flat metric: no failure predicted
    assert doc["health_index"] == 1.0


def test_device_health_unknown_404(api):
    base, _, _ = api
    assert requests.get(f"{base}/api/v1/devices/nope/health", timeout=5).status_code == 404


def test_alerts_listing_and_filters(api):
    base, service, _ = api
    _, a = service.store.dedup_or_insert(make_alert(), 300.0)
    service.store.dedup_or_insert(
        make_alert(source_domain="security", kind="brute_force_login", severity="major",
                   route_or_device="10.0.0.8", position_m=None, geo=None),
        300.0,
    )
    service.store.transition(a.alert_id, "acknowledge")

    all_alerts = requests.get(f"{base}/api/v1/alerts", timeout=5).json()["alerts"]
    assert len(all_alerts) == 2
    acked = requests.get(f"{base}/api/v1/alerts?status=acknowledged", timeout=5).json()["alerts"]
    assert [x["alert_id"] for x in acked] == [a.alert_id]
    security = requests.get(f"{base}/api/v1/alerts?domain=security", timeout=5).json()["alerts"]
    assert [x["kind"] for x in security] == ["brute_force_login"]


def test_geojson_endpoint(api):
    base, service, _ = api
    service.store.dedup_or_insert(make_alert(), 300.0)
    doc = requests.get(f"{base}/api/v1/map/geojson", timeout=5).json()
    assert doc["type"] == "FeatureCollection"
    types = [f["geometry"]["type"] for f in doc["features"]]
    assert types == ["LineString", "Point"]


def test_unknown_endpoint_404(api):
    base, _, _ = api
    resp = requests.get(f"{base}/api/v1/nope", timeout=5)
    assert resp.status_code == 404
    assert resp.json()["error"]["code"] == "not_found"


# -- POST endpoints -------------------------------------------------------------


def test_acknowledge_then_conflict(api):
    base, service, _ = api
    _, a = service.store.dedup_or_insert(make_alert(), 300.0)
    resp = requests.post(f"{base}/api/v1/alerts/{a.alert_id}/acknowledge", timeout=5)
    assert resp.status_code == 200
    assert resp.json()["status"] == "acknowledged"
    resp = requests.post(f"{base}/api/v1/alerts/{a.alert_id}/acknowledge", timeout=5)
    assert resp.status_code == 409
    assert resp.json()["error"]["code"] == "illegal_transition"


def test_resolve_with_tag(api):
    base, service, _ = api
    _, a = service.store.dedup_or_insert(make_alert(), 300.0)
    resp = requests.post(
        f"{base}/api/v1/alerts/{a.alert_id}/resolve", json={"tag": "false-positive"}, timeout=5
    )
    assert resp.status_code == 200
    doc = resp.json()
    assert doc["status"] == "resolved"
    assert "false-positive" in doc["tags"]


def test_transition_unknown_alert_404(api):
    base, _, _ = api
    resp = requests.post(f"{base}/api/v1/alerts/01HUNKNOWN0000000000000000/resolve", timeout=5)
    assert resp.status_code == 404


def test_inject_incident_round_trip(api):
    base, service, clock = api
    body = {
        "incident_id": "demo-cut",
        "kind": "fiber_cut",
        "magnitude": 0.0,
        "injected_at": "2024-01-01T00:01:00Z",
        "route_id": "ring",
        "position_m": 1_200.0,
    }
    resp = requests.post(f"{base}/api/v1/scenario/inject", json=body, timeout=5)
    assert resp.status_code == 202
    assert resp.json()["incident_id"] == "demo-cut"
    service.run_until(clock.now() + timedelta(seconds=10))
    alerts = requests.get(f"{base}/api/v1/alerts?domain=fiber", timeout=5).json()["alerts"]
    assert len(alerts) == 1
    assert alerts[0]["kind"] == "fiber_cut"
    assert alerts[0]["position_m"] == pytest.approx(1_200.0, abs=30.0)


def test_inject_validation_errors(api):
    base, _, _ = api
    resp = requests.post(f"{base}/api/v1/scenario/inject", json={"kind": "fiber_cut"}, timeout=5)
    assert resp.status_code == 400
    assert resp.json()["error"]["code"] == "bad_request"
    resp = requests.post(
        f"{base}/api/v1/scenario/inject",
        json={"incident_id": "x", "kind": "fiber_cut", "route_id": "ghost", "position_m": 1.0},
        timeout=5,
    )
    assert resp.status_code == 404
    resp = requests.post(
        f"{base}/api/v1/scenario/inject",
        data=b"{not json",
        headers={"Content-Type": "application/json"},
        timeout=5,
    )
    assert resp.status_code == 400


def test_post_unknown_endpoint(api):
    base, _, _ = api
    assert requests.post(f"{base}/api/v1/nothing", timeout=5).status_code == 404


# -- server-sent events ------------------------------------------------------------


def test_stream_snapshot_then_live(api):
    base, service, _ = api
    _, existing = service.store.dedup_or_insert(make_alert(), 300.0)

    def later_insert():
        time.sleep(0.3)
        service.store.dedup_or_insert(
            make_alert(source_domain="hardware", kind="critical", severity="critical",
                       route_or_device="amp-01", position_m=None, geo=None),
            300.0,
        )

    threading.Thread(target=later_insert, daemon=True).start()
    events = []
    with requests.get(f"{base}/api/v1/stream", stream=True, timeout=10) as resp:
        assert resp.status_code == 200
        assert resp.headers["Content-Type"].startswith("text/event-stream")
        for line in resp.iter_lines(chunk_size=1):
            if line.startswith(b"data: "):
                events.append(json.loads(line[6:]))
            if len(events) == 2:
                break
    assert events[0]["op"] == "snapshot"
    assert events[0]["alert"]["alert_id"] == existing.alert_id
    assert events[1]["op"] == "insert"
    assert events[1]["alert"]["route_or_device"] == "amp-01"


def test_stream_carries_transitions(api):
    base, service, _ = api
    _, existing = service.store.dedup_or_insert(make_alert(), 300.0)

    def later_ops():
        time.sleep(0.3)
        service.store.dedup_or_insert(make_alert(), 300.0)  # merge
        service.store.transition(existing.alert_id, "acknowledge")

    threading.Thread(target=later_ops, daemon=True).start()
    ops = []
    with requests.get(f"{base}/api/v1/stream", stream=True, timeout=10) as resp:
        for line in resp.iter_lines(chunk_size=1):
            if line.startswith(b"data: "):
                doc = json.loads(line[6:])
                ops.append(doc["op"])
                if doc["op"] == "transition":
                    assert doc["alert"]["status"] == "acknowledged"
            if len(ops) == 3:
                break
    assert ops == ["snapshot", "merge", "transition"]


# -- static dashboard serving ----------------------------------------------------


@pytest.fixture
def static_api(tmp_path):
    static = tmp_path / "static"
    static.mkdir()
    (static / "index.html").write_text("<!doctype html><title>deepalm</title>")
    (static / "app.js").write_text("console.log('ok')")
    (tmp_path / "secret.txt").write_text("keep out")

    config = MonitorConfig(
        routes=(SHORT,), persistence_path=str(tmp_path / "alerts.journal"),
    )
    service = MonitorService(config, clock=SimClock(T0))
    server = create_server(service, "127.0.0.1", 0, static_dir=static)
    serve_in_thread(server)
    yield f"127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    server.server_close()
    service.store.close()


def test_static_serves_index_and_assets(static_api):
    base = f"http://{static_api}"
    resp = requests.get(f"{base}/", timeout=5)
    assert resp.status_code == 200
    assert "deepalm" in resp.text
    assert requests.get(f"{base}/index.html", timeout=5).status_code == 200
    js = requests.get(f"{base}/app.js", timeout=5)
    assert js.status_code == 200
    assert "javascript" in js.headers["Content-Type"]


def test_static_missing_file_404(static_api):
    assert requests.get(f"http://{static_api}/nope.css", timeout=5).status_code == 404


def test_static_blocks_path_traversal(static_api):
    host, port = static_api.split(":")
    conn = http.client.HTTPConnection(host, int(port), timeout=5)
    # raw request: the client must not normalize away the dot-dots
    conn.request("GET", "/../secret.txt")
    resp = conn.getresponse()
    body = resp.read()
    assert resp.status == 404
    assert b"keep out" not in body
    conn.close()


def test_api_without_static_dir_404s_root(api):
    base, _, _ = api
    assert requests.get(f"{base}/", timeout=5).status_code == 404
