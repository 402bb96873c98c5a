from datetime import datetime, timedelta, timezone

import pytest
from hypothesis import given, settings, strategies as st

from deepalm.fiber import FiberEventSpec, FiberRoute, IncidentSpec, OtdrParams, synthesize_trace
from deepalm.geo import GeoPoint
from deepalm.maintenance import DeviceProfile, TelemetrySeries
from deepalm.service.alerts import (
    Alert,
    AlertStore,
    IllegalTransitionError,
    UnknownAlertError,
)
from deepalm.service.clock import SimClock
from deepalm.service.config import MonitorConfig
from deepalm.service.engine import (
    DEMO_TAG,
    IngestError,
    MonitorService,
    UnknownTargetError,
    run_scenario,
)
from deepalm.siem import SecurityRule

T0 = datetime(2024, 1, 1, tzinfo=timezone.utc)

_CROCKFORD = set("0123456789ABCDEFGHJKMNPQRSTVWXYZ")


def candidate(target="ring", kind="fiber_cut", domain="fiber", position=None, **overrides):
    base = dict(
        alert_id="",
        source_domain=domain,
        kind=kind,
        severity="critical",
        route_or_device=target,
        summary="s",
        created_at=T0,
        updated_at=T0,
        position_m=position,
    )
    base.update(overrides)
    return Alert(**base)


@pytest.fixture
def store(tmp_path):
    clock = SimClock(T0)
    s = AlertStore(tmp_path / "alerts.journal", clock)
    yield s, clock, tmp_path / "alerts.journal"
    s.close()


# -- alert store: insert / dedup ---------------------------------------------------


def test_insert_assigns_id_and_defaults(store):
    s, clock, _ = store
    outcome, alert = s.dedup_or_insert(candidate(), 300.0)
    assert outcome == "inserted"
    assert len(alert.alert_id) == 26
    assert set(alert.alert_id) <= _CROCKFORD
    assert alert.status == "open"
    assert alert.occurrence_count == 1
    assert alert.created_at == clock.now()


def test_duplicate_merges(store):
    s, clock, _ = store
    _, first = s.dedup_or_insert(candidate(), 300.0)
    clock.advance(30.0)
    outcome, merged = s.dedup_or_insert(candidate(), 300.0)
    assert outcome == "merged"
    assert merged.alert_id == first.alert_id
    assert merged.occurrence_count == 2
    assert merged.updated_at == clock.now()
    assert merged.created_at == first.created_at


def test_dedup_window_expiry(store):
    s, clock, _ = store
    s.dedup_or_insert(candidate(), 300.0)
    clock.advance(301.0)
    outcome, _ = s.dedup_or_insert(candidate(), 300.0)
    assert outcome == "inserted"
    assert len(s.list_alerts()) == 2


def test_dedup_merge_extends_window(store):
    # each merge refreshes updated_at, so a steady repeat keeps folding in
    s, clock, _ = store
    s.dedup_or_insert(candidate(), 300.0)
    for _ in range(4):
        clock.advance(200.0)
        outcome, alert = s.dedup_or_insert(candidate(), 300.0)
        assert outcome == "merged"
    assert alert.occurrence_count == 5


def test_dedup_respects_position_tolerance(store):
    s, clock, _ = store
    geo = GeoPoint(52.0, 13.0)
    s.dedup_or_insert(candidate(position=12000.0, geo=geo), 300.0, 30.0)
    outcome, _ = s.dedup_or_insert(candidate(position=12020.0, geo=geo), 300.0, 30.0)
    assert outcome == "merged"
    outcome, _ = s.dedup_or_insert(candidate(position=12100.0, geo=geo), 300.0, 30.0)
    assert outcome == "inserted"


def test_dedup_distinguishes_kind_target_domain(store):
    s, _, _ = store
    s.dedup_or_insert(candidate(), 300.0)
    assert s.dedup_or_insert(candidate(kind="new_bend"), 300.0)[0] == "inserted"
    assert s.dedup_or_insert(candidate(target="other"), 300.0)[0] == "inserted"
    assert (
        s.dedup_or_insert(candidate(domain="hardware", kind="fiber_cut"), 300.0)[0]
        == "inserted"
    )


def test_resolved_alerts_never_absorb(store):
    s, _, _ = store
    _, first = s.dedup_or_insert(candidate(), 300.0)
    s.transition(first.alert_id, "resolve")
    outcome, fresh = s.dedup_or_insert(candidate(), 300.0)
    assert outcome == "inserted"
    assert fresh.alert_id != first.alert_id


def test_acknowledged_alerts_still_absorb(store):
    s, _, _ = store
    _, first = s.dedup_or_insert(candidate(), 300.0)
    s.transition(first.alert_id, "acknowledge")
    assert s.dedup_or_insert(candidate(), 300.0)[0] == "merged"


# -- alert store: transitions --------------------------------------------------------


def test_transition_lifecycle(store):
    s, _, _ = store
    _, alert = s.dedup_or_insert(candidate(), 300.0)
    acked = s.transition(alert.alert_id, "acknowledge")
    assert acked.status == "acknowledged"
    resolved = s.transition(alert.alert_id, "resolve", tag="fixed")
    assert resolved.status == "resolved"
    assert "fixed" in resolved.tags


def test_resolve_straight_from_open(store):
    s, _, _ = store
    _, alert = s.dedup_or_insert(candidate(), 300.0)
    assert s.transition(alert.alert_id, "resolve").status == "resolved"


def test_illegal_transitions_rejected(store):
    s, _, _ = store
    _, alert = s.dedup_or_insert(candidate(), 300.0)
    s.transition(alert.alert_id, "acknowledge")
    with pytest.raises(IllegalTransitionError):
        s.transition(alert.alert_id, "acknowledge")
    s.transition(alert.alert_id, "resolve")
    for action in ("acknowledge", "resolve"):
        with pytest.raises(IllegalTransitionError):
            s.transition(alert.alert_id, action)


def test_unknown_action_and_alert(store):
    s, _, _ = store
    with pytest.raises(IllegalTransitionError):
        s.transition("01HTEST00000000000000000AA", "escalate")
    with pytest.raises(UnknownAlertError):
        s.transition("01HTEST00000000000000000AA", "resolve")


def test_list_alerts_filters(store):
    s, _, _ = store
    _, a = s.dedup_or_insert(candidate(), 300.0)
    s.dedup_or_insert(candidate(domain="security", kind="brute_force_login", severity="major"), 300.0)
    s.transition(a.alert_id, "acknowledge")
    assert len(s.list_alerts()) == 2
    assert [x.source_domain for x in s.list_alerts(domain="security")] == ["security"]
    assert [x.alert_id for x in s.list_alerts(status="acknowledged")] == [a.alert_id]
    assert s.list_alerts(status="resolved") == []


# -- alert store: ids and journal ------------------------------------------------------


def test_ulids_sort_with_creation_order(store):
    s, clock, _ = store
    ids = []
    for i in range(50):
        if i % 3 == 0:
            clock.advance(0.4)
        _, alert = s.dedup_or_insert(candidate(target=f"t{i}"), 300.0)
        ids.append(alert.alert_id)
    assert ids == sorted(ids)
    assert len(set(ids)) == 50


def test_journal_replay_reconstructs_state(store):
    s, clock, path = store
    _, a = s.dedup_or_insert(candidate(), 300.0)
    clock.advance(10)
    s.dedup_or_insert(candidate(), 300.0)  # merge
    _, b = s.dedup_or_insert(candidate(domain="security", kind="x", severity="minor"), 300.0)
    s.transition(a.alert_id, "acknowledge")
    s.transition(b.alert_id, "resolve", tag="noise")

    replayed = AlertStore(path, SimClock(clock.now()))
    assert replayed.list_alerts() == s.list_alerts()
    replayed.close()


def test_store_survives_reopen_and_append(store):
    s, clock, path = store
    _, a = s.dedup_or_insert(candidate(), 300.0)
    s.close()
    s2 = AlertStore(path, SimClock(clock.now() + timedelta(seconds=1)))
    s2.transition(a.alert_id, "acknowledge")
    s3 = AlertStore(path, SimClock(clock.now() + timedelta(seconds=2)))
    assert s3.get(a.alert_id).status == "acknowledged"
    s2.close()
    s3.close()


def test_memory_only_store_works_without_path():
    s = AlertStore(None, SimClock(T0))
    outcome, _ = s.dedup_or_insert(candidate(), 300.0)
    assert outcome == "inserted"
    s.close()


def test_listeners_see_journal_entries(store):
    s, _, _ = store
    seen = []
    unsubscribe = s.subscribe(lambda seq, entry: seen.append((seq, entry["op"])))
    _, a = s.dedup_or_insert(candidate(), 300.0)
    s.transition(a.alert_id, "resolve")
    unsubscribe()
    s.dedup_or_insert(candidate(target="other"), 300.0)
    assert [op for _, op in seen] == ["insert", "transition"]
    assert [seq for seq, _ in seen] == [1, 2]


@settings(max_examples=25, deadline=None)
@given(
    st.lists(
        st.one_of(
            st.tuples(st.just("insert"), st.sampled_from(["t1", "t2", "t3"])),
            st.tuples(st.just("acknowledge"), st.integers(0, 5)),
            st.tuples(st.just("resolve"), st.integers(0, 5)),
            st.tuples(st.just("advance"), st.integers(1, 400)),
        ),
        max_size=30,
    )
)
def test_store_state_machine_and_replay(tmp_path_factory, ops):
    path = tmp_path_factory.mktemp("store") / "j.journal"
    clock = SimClock(T0)
    s = AlertStore(path, clock)
    model: dict[str, str] = {}
    ids: list[str] = []
    for op, arg in ops:
        if op == "insert":
            outcome, alert = s.dedup_or_insert(candidate(target=arg), 300.0)
            model[alert.alert_id] = s.get(alert.alert_id).status
            if outcome == "inserted":
                ids.append(alert.alert_id)
        elif op == "advance":
            clock.advance(float(arg))
        else:
            if not ids:
                continue
            alert_id = ids[arg % len(ids)]
            before = s.get(alert_id).status
            legal = ("open",) if op == "acknowledge" else ("open", "acknowledged")
            if before in legal:
                after = s.transition(alert_id, op).status
                assert after == ("acknowledged" if op == "acknowledge" else "resolved")
            else:
                with pytest.raises(IllegalTransitionError):
                    s.transition(alert_id, op)
                assert s.get(alert_id).status == before
    replayed = AlertStore(path, SimClock(clock.now()))
    assert replayed.list_alerts() == s.list_alerts()
    replayed.close()
    s.close()


# -- monitor service ---------------------------------------------------------------------


RING = FiberRoute(
    route_id="ring",
    length_m=12_000.0,
    attenuation_db_per_km=0.21,
    waypoints=((52.5200, 13.4050, 0.0), (52.5000, 13.6000, 6_000.0), (52.4500, 13.7000, 12_000.0)),
    baseline_events=(
        FiberEventSpec(3_000.0, "connector", 0.4, -48.0),
        FiberEventSpec(7_500.0, "splice", 0.5),
    ),
)

AMP = DeviceProfile(
    "amp-01", "laser_bias_ma", nominal=50.0, failure_threshold=90.0,
    drift_per_hour=0.0, noise_std=0.05, seed=7,
)

BRUTE_FORCE = SecurityRule(
    "brute_force_login", "action=failed_login", "src_ip", 5, 60.0, "major"
)


def make_config(tmp_path, **overrides):
    base = dict(
        routes=(RING,),
        devices=(AMP,),
        rules=(BRUTE_FORCE,),
        scan_interval_s=5.0,
        telemetry_interval_s=10.0,
        log_poll_interval_s=10.0,
        persistence_path=str(tmp_path / "alerts.journal"),
        otdr_params=OtdrParams(noise_std_db_linear_equiv=0.02, seed=20240101),
    )
    base.update(overrides)
    return MonitorConfig(**base)


def make_service(tmp_path, **overrides):
    clock = SimClock(T0)
    config = make_config(tmp_path, **overrides)
    service = MonitorService(config, clock=clock)
    return service, clock


def test_quiet_run_is_alert_free(tmp_path):
    service, clock = make_service(tmp_path)
    service.start()
    service.run_until(T0 + timedelta(seconds=600))
    assert service.store.list_alerts() == []


def test_scheduler_executes_every_interval(tmp_path):
    routes = tuple(
        FiberRoute(
            route_id=f"r{i}",
            length_m=2_000.0,
            attenuation_db_per_km=0.2,
            waypoints=((52.0 + i, 13.0, 0.0), (52.5 + i, 13.5, 2_000.0)),
        )
        for i in range(3)
    )
    service, clock = make_service(tmp_path, routes=routes)
    seen = []
    original = service.ingest_trace
    service.ingest_trace = lambda trace: (seen.append(trace.route_id), original(trace))[1]
    service.start()
    service.run_until(T0 + timedelta(seconds=60))
    # baseline at t=0 plus scans at 5..60 for each of the three routes
    assert len(seen) == 3 * 13
    assert seen.count("r0") == 13


def test_ingest_trace_bootstrap_returns_nothing(tmp_path):
    service, _ = make_service(tmp_path)
    trace = synthesize_trace(RING, RING.baseline_events, OtdrParams(seed=5), captured_at=T0)
    assert service.ingest_trace(trace) == []
    assert service.latest_trace("ring") == trace
    assert len(service.latest_events("ring")) == 2


def test_ingest_trace_out_of_order_rejected(tmp_path):
    service, _ = make_service(tmp_path)
    newer = synthesize_trace(
        RING, RING.baseline_events, OtdrParams(seed=5), captured_at=T0 + timedelta(seconds=60)
    )
    older = synthesize_trace(RING, RING.baseline_events, OtdrParams(seed=6), captured_at=T0)
    service.ingest_trace(newer)
    with pytest.raises(IngestError, match="out of captured_at order"):
        service.ingest_trace(older)


def test_unknown_targets_rejected(tmp_path):
    service, _ = make_service(tmp_path)
    ghost = synthesize_trace(RING, (), OtdrParams(seed=5), captured_at=T0)
    ghost = type(ghost)(
        route_id="ghost", captured_at=T0, params=ghost.params, samples=ghost.samples
    )
    with pytest.raises(UnknownTargetError):
        service.ingest_trace(ghost)
    with pytest.raises(UnknownTargetError):
        service.ingest_telemetry(
            TelemetrySeries("ghost", "m", T0, 10.0, (1.0, 1.0))
        )
    with pytest.raises(UnknownTargetError):
        service.latest_trace("ghost")
    with pytest.raises(UnknownTargetError):
        service.device_health("ghost")


def test_ingest_telemetry_flat_is_quiet(tmp_path):
    service, _ = make_service(tmp_path)
    series = TelemetrySeries("amp-01", "laser_bias_ma", T0, 3600.0, (50.0,) * 12)
    assert service.ingest_telemetry(series) == []
    assert service.device_health("amp-01").rul_hours == float("inf")


def test_ingest_telemetry_decay_alerts(tmp_path):
    service, _ = make_service(
        tmp_path,
        devices=(
            DeviceProfile(
                "amp-01", "laser_bias_ma", nominal=100.0, failure_threshold=40.0,
                drift_per_hour=-2.0,
            ),
        ),
    )
    values = tuple(100.0 - 2.0 * i for i in range(11))  # 80 at t = 10 h
    series = TelemetrySeries("amp-01", "laser_bias_ma", T0, 3600.0, values)
    alerts = service.ingest_telemetry(series)
    assert len(alerts) == 1
    alert = alerts[0]
    assert alert.source_domain == "hardware"
    assert alert.kind == "critical"
    assert alert.severity == "critical"
    assert "RUL 20.0 h" in alert.summary
    # an identical re-ingest dedups, returning nothing new
    assert service.ingest_telemetry(series) == []
    assert service.store.get(alert.alert_id).occurrence_count == 2


def test_inject_unknown_targets(tmp_path):
    service, _ = make_service(tmp_path)
    service.start()
    with pytest.raises(UnknownTargetError):
        service.inject_incident(
            IncidentSpec(incident_id="i", kind="fiber_cut", route_id="ghost", position_m=1.0)
        )
    with pytest.raises(UnknownTargetError):
        service.inject_incident(
            IncidentSpec(incident_id="i", kind="device_overheat", device_id="ghost", magnitude=5.0)
        )
    with pytest.raises(UnknownTargetError):
        service.inject_incident(
            IncidentSpec(incident_id="i", kind="login_burst", log_source="ghost", magnitude=5.0)
        )


def test_injected_cut_alerts_with_tags_then_merges(tmp_path):
    service, clock = make_service(tmp_path)
    service.start()
    service.run_until(T0 + timedelta(seconds=30))
    incident_id = service.inject_incident(
        IncidentSpec(
            incident_id="demo-cut", kind="fiber_cut", route_id="ring", position_m=8_000.0
        )
    )
    assert incident_id == "demo-cut"
    service.run_until(T0 + timedelta(seconds=60))
    alerts = service.store.list_alerts()
    assert len(alerts) == 1
    alert = alerts[0]
    assert (alert.source_domain, alert.kind, alert.severity) == ("fiber", "fiber_cut", "critical")
    assert alert.position_m == pytest.approx(8_000.0, abs=30.0)
    assert alert.geo is not None
    assert DEMO_TAG in alert.tags
    assert "incident:demo-cut" in alert.tags
    assert alert.occurrence_count >= 2  # later scans merged into the first alert


def test_injected_burst_alerts_once(tmp_path):
    service, _ = make_service(tmp_path)
    service.start()
    service.run_until(T0 + timedelta(seconds=30))
    service.inject_incident(
        IncidentSpec(
            incident_id="demo-burst", kind="login_burst", log_source="fsp3000-1", magnitude=20.0,
            injected_at=T0 + timedelta(seconds=40),
        )
    )
    service.run_until(T0 + timedelta(seconds=300))
    security = service.store.list_alerts(domain="security")
    assert len(security) == 1
    assert security[0].kind == "brute_force_login"
    assert "incident:demo-burst" in security[0].tags


def test_injected_overheat_alerts(tmp_path):
    service, _ = make_service(tmp_path)
    service.start()
    service.run_until(T0 + timedelta(seconds=30))
    service.inject_incident(
        IncidentSpec(incident_id="demo-heat", kind="device_overheat", device_id="amp-01", magnitude=8.0)
    )
    service.run_until(T0 + timedelta(seconds=400))
    hardware = service.store.list_alerts(domain="hardware")
    assert len(hardware) == 1
    assert hardware[0].severity == "critical"
    assert "incident:demo-heat" in hardware[0].tags
    assert service.device_health("amp-01").rul_hours < 25.0


def test_run_until_needs_sim_clock(tmp_path):
    config = make_config(tmp_path)
    service = MonitorService(config)  # wall clock
    with pytest.raises(IngestError, match="SimClock"):
        service.run_until(datetime.now(timezone.utc))
    service.store.close()


# -- scripted scenarios ----------------------------------------------------------------


SCENARIO = {
    "format": "deepalm-scenario/1",
    "start": "2024-01-01T00:00:00Z",
    "duration_s": 420.0,
    "timeline": [
        {
            "at_s": 60.0,
            "inject": {
                "incident_id": "demo-cut",
                "kind": "fiber_cut",
                "magnitude": 0.0,
                "injected_at": "2024-01-01T00:01:00Z",
                "route_id": "ring",
                "position_m": 8_000.0,
            },
        },
        {
            "at_s": 90.0,
            "inject": {
                "incident_id": "demo-burst",
                "kind": "login_burst",
                "magnitude": 20.0,
                "injected_at": "2024-01-01T00:01:40Z",
                "log_source": "fsp3000-1",
            },
        },
        {
            "at_s": 30.0,
            "inject": {
                "incident_id": "demo-heat",
                "kind": "device_overheat",
                "magnitude": 8.0,
                "injected_at": "2024-01-01T00:00:30Z",
                "device_id": "amp-01",
            },
        },
    ],
}


def fingerprint(alert):
    return (
        alert.source_domain,
        alert.kind,
        alert.severity,
        alert.route_or_device,
        alert.position_m,
        alert.geo,
        alert.summary,
        alert.status,
        alert.occurrence_count,
        alert.created_at,
        alert.updated_at,
        alert.tags,
        tuple(sorted(alert.evidence.items())),
    )


def test_scenario_covers_all_three_domains(tmp_path):
    service = run_scenario(make_config(tmp_path), SCENARIO, tmp_path / "run.journal")
    domains = {a.source_domain for a in service.store.list_alerts()}
    assert domains == {"fiber", "hardware", "security"}
    service.store.close()


def test_scenario_replay_is_field_identical(tmp_path):
    first = run_scenario(make_config(tmp_path), SCENARIO, tmp_path / "a.journal")
    second = run_scenario(make_config(tmp_path), SCENARIO, tmp_path / "b.journal")
    a = [fingerprint(x) for x in first.store.list_alerts()]
    b = [fingerprint(x) for x in second.store.list_alerts()]
    assert a == b
    assert len(a) == 3
    first.store.close()
    second.store.close()


def test_scenario_journal_replays_exactly(tmp_path):
    service = run_scenario(make_config(tmp_path), SCENARIO, tmp_path / "run.journal")
    replayed = AlertStore(tmp_path / "run.journal", SimClock(service.clock.now()))
    assert replayed.list_alerts() == service.store.list_alerts()
    replayed.close()
    service.store.close()


def test_scenario_rejects_bad_document(tmp_path):
    from deepalm.serde import FormatError

    with pytest.raises(FormatError):
        run_scenario(make_config(tmp_path), {"format": "wrong/1", "duration_s": 1.0})
