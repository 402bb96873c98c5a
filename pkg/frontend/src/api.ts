// Thin fetch client for the /api/v1 surface, error envelope included.

import type {
  AlertDoc,
  DetectedEventDoc,
  GeoJsonDoc,
  InjectRequest,
  RouteDoc,
  RulDoc,
  TraceDoc,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
  ) {
    super(message);
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const resp = await fetch(path, init);
  let body: unknown = null;
  try {
    body = await resp.json();
  } catch {
    // non-JSON body; fall through to the status check
  }
  if (!resp.ok) {
    const err = (body as { error?: { code?: string; message?: string } } | null)?.error;
    throw new ApiError(resp.status, err?.code ?? "http_error", err?.message ?? resp.statusText);
  }
  return body as T;
}

function post<T>(path: string, body: unknown): Promise<T> {
  return request<T>(path, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body ?? {}),
  });
}

export const api = {
  health: () => request<{ status: string; version: string }>("/api/v1/health"),
  routes: () => request<{ routes: RouteDoc[] }>("/api/v1/routes"),
  latestTrace: (routeId: string) =>
    request<TraceDoc>(`/api/v1/routes/${encodeURIComponent(routeId)}/trace/latest`),
  latestEvents: (routeId: string) =>
    request<{ route_id: string; events: DetectedEventDoc[] }>(
      `/api/v1/routes/${encodeURIComponent(routeId)}/events/latest`,
    ),
  alerts: () => request<{ alerts: AlertDoc[] }>("/api/v1/alerts"),
  geojson: () => request<GeoJsonDoc>("/api/v1/map/geojson"),
  deviceHealth: (deviceId: string) =>
    request<RulDoc>(`/api/v1/devices/${encodeURIComponent(deviceId)}/health`),
  acknowledge: (alertId: string) =>
    post<AlertDoc>(`/api/v1/alerts/${encodeURIComponent(alertId)}/acknowledge`, {}),
  resolve: (alertId: string, tag?: string) =>
    post<AlertDoc>(`/api/v1/alerts/${encodeURIComponent(alertId)}/resolve`, tag ? { tag } : {}),
  inject: (spec: InjectRequest) =>
    post<{ incident_id: string }>("/api/v1/scenario/inject", spec),
};
