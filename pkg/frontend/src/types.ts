/** Wire types of the ramp HTTP API (canonical JSON field names). */

export interface SessionInfo {
  token: string;
  expires_at: number;
  user_id: string;
  role: string;
}

export interface PolicySchedule {
  active_from: string;
  active_until: string;
  windows: Array<{ days: string[]; start: string; end: string; tz: string }>;
}

export interface PolicyFence {
  rings: Array<Array<{ lat: number; lon: number }>>;
}

export interface PolicyObj {
  sensors: Record<string, number>;
  fence: PolicyFence | null;
  schedule: PolicySchedule;
}

export interface ProjectObj {
  project_id: string;
  owner: string;
  title: string;
  policy: PolicyObj;
  fleet: string[];
  state: string;
  issued_config_versions?: Record<string, number>;
}

export interface EnrichmentObj {
  source: string;
  valid_for: { cell: string; hour_utc: number };
  payload: Record<string, number | string>;
  fetched_at: number;
  status: string;
}

export interface TripSummary {
  trip_id: string;
  scooter_id: string;
  project_id: string | null;
  loan_id: string | null;
  started_at: number;
  ended_at: number;
  duration_s: number;
  distance_m: number;
  sample_counts: Record<string, number>;
  quality_flags: string[];
  enrichment: EnrichmentObj[];
}

export interface TripPage {
  trips: TripSummary[];
  next_cursor: string | null;
}

export interface StatsBucket {
  count: number;
  distance_m: number;
}

export interface StatsReport {
  trip_count: number;
  total_distance_m: number;
  total_duration_s: number;
  mean_speed_mps: number;
  per_day: Record<string, StatsBucket>;
  per_scooter: Record<string, StatsBucket>;
}

export interface GeoJsonFeature {
  type: "Feature";
  geometry: { type: string; coordinates: unknown };
  properties: Record<string, unknown>;
}

export interface FeatureCollection {
  type: "FeatureCollection";
  features: GeoJsonFeature[];
}

export interface BatteryEntry {
  scooter_id: string;
  status: "ok" | "unknown";
  battery_pct: number | null;
  est_range_miles: number | null;
  heartbeat_at: number | null;
}

export interface ApiErrorBody {
  code: string;
  message: string;
  details: unknown;
}

/** Filter state mirrored 1:1 into query parameters. */
export interface TripFilterState {
  project_id?: string;
  scooter_ids?: string[];
  from_ms?: number;
  to_ms?: number;
  region?: Array<[number, number]>; // [lat, lon] vertices of a simple polygon
  region_contained?: boolean;
  min_distance_m?: number;
}
