/** Thin typed client for the ramp API. One base URL, one bearer token. */

import type {
  ApiErrorBody,
  BatteryEntry,
  FeatureCollection,
  PolicyObj,
  ProjectObj,
  SessionInfo,
  StatsReport,
  TripFilterState,
  TripPage,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public body: ApiErrorBody,
  ) {
    super(`${body.code}: ${body.message}`);
  }
}

export function encodeRegion(region: Array<[number, number]>): string {
  return region.map(([lat, lon]) => `${lat},${lon}`).join(";");
}

export function filterParams(f: TripFilterState): URLSearchParams {
  const params = new URLSearchParams();
  if (f.project_id) params.set("project_id", f.project_id);
  if (f.scooter_ids && f.scooter_ids.length) params.set("scooter_ids", f.scooter_ids.join(","));
  if (f.from_ms !== undefined) params.set("from_ms", String(f.from_ms));
  if (f.to_ms !== undefined) params.set("to_ms", String(f.to_ms));
  if (f.region && f.region.length >= 3) params.set("region", encodeRegion(f.region));
  if (f.region_contained) params.set("contained", "true");
  if (f.min_distance_m !== undefined) params.set("min_distance_m", String(f.min_distance_m));
  return params;
}

export class ApiClient {
  constructor(
    public baseUrl: string,
    public token: string = "",
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const headers: Record<string, string> = {};
    if (this.token) headers["Authorization"] = `Bearer ${this.token}`;
    if (body !== undefined) headers["Content-Type"] = "application/json";
    const resp = await fetch(this.baseUrl + path, {
      method,
      headers,
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (!resp.ok) {
      let parsed: ApiErrorBody;
      try {
        parsed = (await resp.json()) as ApiErrorBody;
      } catch {
        parsed = { code: `http_${resp.status}`, message: resp.statusText, details: null };
      }
      throw new ApiError(resp.status, parsed);
    }
    return (await resp.json()) as T;
  }

  login(name: string, credential: string): Promise<SessionInfo> {
    return this.request<SessionInfo>("POST", "/v1/sessions", { name, credential });
  }

  listProjects(): Promise<{ projects: ProjectObj[] }> {
    return this.request("GET", "/v1/projects");
  }

  createProject(title: string, policy: PolicyObj, fleet: string[]): Promise<ProjectObj> {
    return this.request("POST", "/v1/projects", { title, policy, fleet });
  }

  activateProject(projectId: string): Promise<ProjectObj> {
    return this.request("POST", `/v1/projects/${projectId}/activate`);
  }

  queryTrips(f: TripFilterState, cursor?: string, limit?: number): Promise<TripPage> {
    const params = filterParams(f);
    if (cursor) params.set("cursor", cursor);
    if (limit) params.set("limit", String(limit));
    return this.request("GET", `/v1/trips?${params}`);
  }

  /** Every page of a query, concatenated. */
  async allTrips(f: TripFilterState): Promise<TripPage["trips"]> {
    const out: TripPage["trips"] = [];
    let cursor: string | undefined;
    for (;;) {
      const page = await this.queryTrips(f, cursor, 1000);
      out.push(...page.trips);
      if (!page.next_cursor) return out;
      cursor = page.next_cursor;
    }
  }

  tripsGeojson(tripIds: string[], includeSamples = false): Promise<FeatureCollection> {
    const params = new URLSearchParams({ ids: tripIds.join(",") });
    if (includeSamples) params.set("include_samples", "true");
    return this.request("GET", `/v1/trips/geojson?${params}`);
  }

  stats(f: TripFilterState): Promise<StatsReport> {
    return this.request("GET", `/v1/stats?${filterParams(f)}`);
  }

  battery(): Promise<{ scooters: BatteryEntry[] }> {
    return this.request("GET", "/v1/battery");
  }

  exportUrl(f: TripFilterState, format: "csv" | "geojson" | "jsonl"): string {
    const params = filterParams(f);
    params.set("format", format);
    return `${this.baseUrl}/v1/export?${params}`;
  }

  async exportBody(f: TripFilterState, format: "csv" | "geojson" | "jsonl"): Promise<string> {
    const resp = await fetch(this.exportUrl(f, format), {
      headers: this.token ? { Authorization: `Bearer ${this.token}` } : {},
    });
    if (!resp.ok) throw new ApiError(resp.status, (await resp.json()) as ApiErrorBody);
    return resp.text();
  }
}
