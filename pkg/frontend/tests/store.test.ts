import { describe, expect, it } from "vitest";

import {
  applyEvent,
  countAlerts,
  emptyState,
  knownDevices,
  listAlerts,
  resync,
} from "../src/store.js";
import type { AlertDoc } from "../src/types.js";

let counter = 0;

function alert(overrides: Partial<AlertDoc> = {}): AlertDoc {
  counter += 1;
  return {
    alert_id: `01HV0000000000000000000${counter.toString(36).padStart(3, "0")}`,
    source_domain: "fiber",
    kind: "fiber_cut",
    severity: "critical",
    route_or_device: "ring",
    position_m: 12345,
    geo: { latitude_deg: 52, longitude_deg: 13 },
    summary: "fiber cut",
    status: "open",
    occurrence_count: 1,
    created_at: "2024-01-01T00:00:00Z",
    updated_at: "2024-01-01T00:00:00Z",
    tags: [],
    evidence: {},
    ...overrides,
  };
}

describe("applyEvent", () => {
  it("upserts on any payload carrying an alert", () => {
    const state = emptyState();
    const a = alert();
    expect(applyEvent(state, 1, { op: "insert", alert: a })).toBe(true);
    expect(state.alerts.get(a.alert_id)).toBe(a);

    const merged = { ...a, occurrence_count: 2, updated_at: "2024-01-01T00:05:00Z" };
    expect(applyEvent(state, 2, { op: "merge", alert_id: a.alert_id, alert: merged })).toBe(true);
    expect(state.alerts.get(a.alert_id)?.occurrence_count).toBe(2);
  });

  it("reports no change for duplicate snapshots", () => {
    const state = emptyState();
    const a = alert();
    applyEvent(state, 0, { op: "snapshot", alert: a });
    expect(applyEvent(state, 0, { op: "snapshot", alert: { ...a } })).toBe(false);
  });

  it("ignores journal entries without an attached alert", () => {
    const state = emptyState();
    expect(applyEvent(state, 7, { op: "merge", alert_id: "nope" })).toBe(false);
    expect(state.alerts.size).toBe(0);
    expect(state.lastSeq).toBe(7);
  });

  it("tracks the highest seq seen", () => {
    const state = emptyState();
    applyEvent(state, 5, { op: "insert", alert: alert() });
    applyEvent(state, 3, { op: "insert", alert: alert() });
    expect(state.lastSeq).toBe(5);
  });
});

describe("resync", () => {
  it("replaces the working set wholesale", () => {
    const state = emptyState();
    applyEvent(state, 1, { op: "insert", alert: alert() });
    const fresh = [alert(), alert()];
    resync(state, fresh);
    expect(state.alerts.size).toBe(2);
    expect([...state.alerts.values()]).toEqual(fresh);
  });
});

describe("listAlerts", () => {
  it("sorts active before resolved, then severity, then newest", () => {
    const state = emptyState();
    const resolved = alert({ severity: "critical", status: "resolved" });
    const minorOld = alert({ severity: "minor", created_at: "2024-01-01T00:00:00Z" });
    const minorNew = alert({ severity: "minor", created_at: "2024-01-01T01:00:00Z" });
    const major = alert({ severity: "major" });
    for (const a of [resolved, minorOld, minorNew, major]) {
      applyEvent(state, 1, { op: "insert", alert: a });
    }
    expect(listAlerts(state).map((a) => a.alert_id)).toEqual(
      [major, minorNew, minorOld, resolved].map((a) => a.alert_id),
    );
  });

  it("filters by status and domain", () => {
    const state = emptyState();
    applyEvent(state, 1, { op: "insert", alert: alert({ source_domain: "security" }) });
    applyEvent(state, 2, { op: "insert", alert: alert({ status: "resolved" }) });
    expect(listAlerts(state, { domain: "security" })).toHaveLength(1);
    expect(listAlerts(state, { status: "resolved" })).toHaveLength(1);
    expect(listAlerts(state, { status: "all", domain: "all" })).toHaveLength(2);
  });
});

describe("countAlerts", () => {
  it("counts by status and active severity", () => {
    const state = emptyState();
    applyEvent(state, 1, { op: "insert", alert: alert({ severity: "critical" }) });
    applyEvent(state, 2, { op: "insert", alert: alert({ severity: "major", status: "acknowledged" }) });
    applyEvent(state, 3, { op: "insert", alert: alert({ severity: "critical", status: "resolved" }) });
    const c = countAlerts(state);
    expect(c).toEqual({ open: 1, acknowledged: 1, resolved: 1, critical: 1, major: 1 });
  });
});

describe("knownDevices", () => {
  it("collects distinct hardware targets, sorted", () => {
    const state = emptyState();
    for (const dev of ["amp-02", "amp-01", "amp-02"]) {
      applyEvent(state, 1, {
        op: "insert",
        alert: alert({ source_domain: "hardware", route_or_device: dev, position_m: null, geo: null }),
      });
    }
    applyEvent(state, 2, { op: "insert", alert: alert() }); // fiber — excluded
    expect(knownDevices(state)).toEqual(["amp-01", "amp-02"]);
  });
});
