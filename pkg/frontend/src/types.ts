// Wire types for the deepalm HTTP API (v1). Shapes mirror the server's
// to_json() output exactly; everything here is plain JSON data.

export type Severity = "info" | "minor" | "major" | "critical";
export type AlertStatus = "open" | "acknowledged" | "resolved";
export type Domain = "fiber" | "hardware" | "security";

export interface GeoPointDoc {
  latitude_deg: number;
  longitude_deg: number;
}

export interface AlertDoc {
  alert_id: string;
  source_domain: Domain;
  kind: string;
  severity: Severity;
  route_or_device: string;
  position_m: number | null;
  geo: GeoPointDoc | null;
  summary: string;
  status: AlertStatus;
  occurrence_count: number;
  created_at: string;
  updated_at: string;
  tags: string[];
  evidence: Record<string, unknown>;
}

/** One SSE `alert` event: a store snapshot line or a live journal entry.
 * The server attaches the current full alert whenever it can. */
export interface StreamPayload {
  op: "snapshot" | "insert" | "merge" | "transition";
  alert?: AlertDoc;
  alert_id?: string;
  action?: string;
  tag?: string;
  at?: string;
}

export interface RouteDoc {
  route_id: string;
  length_m: number;
  attenuation_db_per_km: number;
  group_index: number;
  /** [lat_deg, lon_deg, distance_m] per waypoint, distance ascending. */
  waypoints: [number, number, number][];
  baseline_events: { position_m: number; kind: string; loss_db: number }[];
}

export interface TraceDoc {
  route_id: string;
  captured_at: string;
  params: { sample_spacing_m: number; noise_floor_db: number; [k: string]: unknown };
  samples: number[];
}

export interface DetectedEventDoc {
  position_m: number;
  kind: string;
  loss_db: number;
  confidence: number;
  width_m: number;
  reflectance_db?: number;
}

export interface RulDoc {
  device_id: string;
  health_index: number;
  /** null = no failure predicted (infinite RUL). */
  rul_hours: number | null;
  slope_per_hour: number;
  fit_residual_std: number;
  estimated_at: string;
}

export interface GeoJsonFeature {
  type: "Feature";
  geometry:
    | { type: "LineString"; coordinates: [number, number][] }
    | { type: "Point"; coordinates: [number, number] };
  properties: Record<string, unknown>;
}

export interface GeoJsonDoc {
  type: "FeatureCollection";
  features: GeoJsonFeature[];
  warnings?: string[];
}

export interface InjectRequest {
  incident_id: string;
  kind: string;
  magnitude?: number;
  route_id?: string;
  device_id?: string;
  log_source?: string;
  position_m?: number;
}
