// Display formatting. Pure functions so they stay unit-testable.

import type { Severity } from "./types.js";

export const SEVERITY_RANK: Record<Severity, number> = {
  critical: 3,
  major: 2,
  minor: 1,
  info: 0,
};

export function severityRank(s: string): number {
  return SEVERITY_RANK[s as Severity] ?? -1;
}

/** Distance along a route: metres under 1 km, otherwise km with 2 decimals. */
export function fmtDistance(m: number | null | undefined): string {
  if (m === null || m === undefined || !Number.isFinite(m)) return "—";
  if (Math.abs(m) < 1000) return `${Math.round(m)} m`;
  return `${(m / 1000).toFixed(2)} km`;
}

export function fmtDb(x: number): string {
  return `${x.toFixed(2)} dB`;
}

/** Remaining useful life; null means no failure predicted. */
export function fmtRul(rulHours: number | null): string {
  if (rulHours === null) return "no failure predicted";
  if (!Number.isFinite(rulHours)) return "no failure predicted";
  if (rulHours < 1) return `${Math.max(0, Math.round(rulHours * 60))} min`;
  if (rulHours < 48) return `${rulHours.toFixed(1)} h`;
  return `${(rulHours / 24).toFixed(1)} d`;
}

export function fmtHealth(h: number): string {
  return `${Math.round(Math.min(1, Math.max(0, h)) * 100)}%`;
}

/** Compact age like "12 s", "5 min", "3 h", "2 d". Future stamps clamp to "now". */
export function fmtAge(nowMs: number, iso: string): string {
  const then = Date.parse(iso);
  if (Number.isNaN(then)) return "?";
  const s = Math.max(0, Math.floor((nowMs - then) / 1000));
  if (s < 1) return "now";
  if (s < 60) return `${s} s`;
  if (s < 3600) return `${Math.floor(s / 60)} min`;
  if (s < 86400) return `${Math.floor(s / 3600)} h`;
  return `${Math.floor(s / 86400)} d`;
}

export function fmtTimestamp(iso: string): string {
  const d = new Date(iso);
  if (Number.isNaN(d.getTime())) return iso;
  return d.toISOString().replace("T", " ").replace(/\.\d+Z$/, "Z");
}

/** "fiber_cut" -> "fiber cut" for labels. */
export function fmtKind(kind: string): string {
  return kind.replace(/_/g, " ");
}
