// Client-side alert state: a map keyed by alert_id fed from SSE events,
// with a full-resync path for (re)connects. No DOM in here.

import { severityRank } from "./format.js";
import type { AlertDoc, AlertStatus, Domain, StreamPayload } from "./types.js";

export interface DashState {
  alerts: Map<string, AlertDoc>;
  /** Highest live journal seq applied; snapshot lines arrive as seq 0. */
  lastSeq: number;
}

export function emptyState(): DashState {
  return { alerts: new Map(), lastSeq: 0 };
}

/** Apply one SSE payload. Returns true when the visible state changed. */
export function applyEvent(state: DashState, seq: number, payload: StreamPayload): boolean {
  if (seq > state.lastSeq) state.lastSeq = seq;
  const alert = payload.alert;
  if (!alert) return false; // merge/transition entries without enrichment
  const prev = state.alerts.get(alert.alert_id);
  if (prev && prev.updated_at === alert.updated_at && prev.status === alert.status
      && prev.occurrence_count === alert.occurrence_count) {
    return false;
  }
  state.alerts.set(alert.alert_id, alert);
  return true;
}

/** Replace the whole alert set (GET /alerts after a reconnect). */
export function resync(state: DashState, alerts: AlertDoc[]): void {
  state.alerts.clear();
  for (const a of alerts) state.alerts.set(a.alert_id, a);
}

export interface AlertFilter {
  status?: AlertStatus | "all";
  domain?: Domain | "all";
}

/** Active-first ordering: unresolved before resolved, then severity,
 * then newest created. */
export function listAlerts(state: DashState, filter: AlertFilter = {}): AlertDoc[] {
  const out: AlertDoc[] = [];
  for (const a of state.alerts.values()) {
    if (filter.status && filter.status !== "all" && a.status !== filter.status) continue;
    if (filter.domain && filter.domain !== "all" && a.source_domain !== filter.domain) continue;
    out.push(a);
  }
  out.sort((a, b) => {
    const ra = a.status === "resolved" ? 1 : 0;
    const rb = b.status === "resolved" ? 1 : 0;
    if (ra !== rb) return ra - rb;
    const s = severityRank(b.severity) - severityRank(a.severity);
    if (s !== 0) return s;
    if (a.created_at !== b.created_at) return a.created_at < b.created_at ? 1 : -1;
    return a.alert_id < b.alert_id ? -1 : 1;
  });
  return out;
}

export interface Counts {
  open: number;
  acknowledged: number;
  resolved: number;
  critical: number;
  major: number;
}

export function countAlerts(state: DashState): Counts {
  const c: Counts = { open: 0, acknowledged: 0, resolved: 0, critical: 0, major: 0 };
  for (const a of state.alerts.values()) {
    c[a.status] += 1;
    if (a.status !== "resolved") {
      if (a.severity === "critical") c.critical += 1;
      if (a.severity === "major") c.major += 1;
    }
  }
  return c;
}

/** Device ids seen on hardware alerts — the API has no device index, so the
 * health panel learns targets from the alert stream. */
export function knownDevices(state: DashState): string[] {
  const ids = new Set<string>();
  for (const a of state.alerts.values()) {
    if (a.source_domain === "hardware") ids.add(a.route_or_device);
  }
  return [...ids].sort();
}
