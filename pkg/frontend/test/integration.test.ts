/** UI–API consistency against a real server.
 *
 * Spawns `labctl serve`, seeds it with a simulated fleet run, then checks
 * the portal's view models against the API: polyline counts equal query
 * results for random filters, chart buckets reconcile with table totals,
 * and client-side policy validation blocks with the server's error codes.
 */

import { ChildProcess, execFile, spawn } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import { createServer } from "node:net";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { promisify } from "node:util";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import { buildTripPaths, fitViewport } from "../src/geometry.js";
import { validatePolicy } from "../src/policy.js";
import { buildChartModel } from "../src/views/statsmodel.js";
import type { PolicyObj, TripFilterState } from "../src/types.js";

const execFileP = promisify(execFile);
const SECRET = "ui-secret";
const CAMPUS = { lat: 29.4241, lon: -98.4936 };
const DEMO_START_MS = 1_748_851_200_000;

let serveProc: ChildProcess;
let controllerUrl: string;
let rampUrl: string;
let admin: ApiClient;

function freePort(): Promise<number> {
  return new Promise((resolve, reject) => {
    const srv = createServer();
    srv.listen(0, "127.0.0.1", () => {
      const address = srv.address();
      if (address && typeof address === "object") {
        const port = address.port;
        srv.close(() => resolve(port));
      } else {
        reject(new Error("no port"));
      }
    });
  });
}

async function waitHealthy(url: string, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const resp = await fetch(`${url}/healthz`);
      if (resp.ok) return;
    } catch {
      /* not up yet */
    }
    if (Date.now() > deadline) throw new Error(`server at ${url} never became healthy`);
    await new Promise((r) => setTimeout(r, 150));
  }
}

// Deterministic PRNG so "random filters" are reproducible in CI.
function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a |= 0;
    a = (a + 0x6d2b79f5) | 0;
    let t = Math.imul(a ^ (a >>> 15), 1 | a);
    t = (t + Math.imul(t ^ (t >>> 7), 61 | t)) ^ t;
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

beforeAll(async () => {
  const cport = await freePort();
  const rport = await freePort();
  controllerUrl = `http://127.0.0.1:${cport}`;
  rampUrl = `http://127.0.0.1:${rport}`;
  serveProc = spawn(
    "labctl",
    ["serve", "--controller-port", String(cport), "--ramp-port", String(rport), "--token-secret", SECRET],
    { stdio: "ignore" },
  );
  await waitHealthy(controllerUrl);
  await waitHealthy(rampUrl);

  const work = mkdtempSync(join(tmpdir(), "scooterlab-ui-"));
  const scenarioPath = join(work, "demo.json");
  await execFileP("labctl", ["sim", "scenario", "--kind", "demo", "--seed", "23", "-o", scenarioPath]);
  const env = { ...process.env, SCOOTERLAB_URL: controllerUrl, SCOOTERLAB_TOKEN: SECRET };
  await execFileP("labctl", ["sim", "run", scenarioPath], { env, timeout: 240_000 });
  admin = new ApiClient(rampUrl, SECRET);
}, 300_000);

afterAll(() => {
  serveProc?.kill("SIGTERM");
});

function randomFilter(rnd: () => number, trial: number): TripFilterState {
  const f: TripFilterState = {};
  const all = ["scooter-01", "scooter-02", "scooter-03"];
  if (rnd() < 0.5) {
    f.scooter_ids = all.filter(() => rnd() < 0.6);
    if (!f.scooter_ids.length) f.scooter_ids = [all[trial % 3]];
  }
  if (rnd() < 0.7) {
    const a = DEMO_START_MS + Math.floor(rnd() * 900_000);
    const b = DEMO_START_MS + Math.floor(rnd() * 900_000);
    if (a !== b) {
      f.from_ms = Math.min(a, b);
      f.to_ms = Math.max(a, b);
    }
  }
  if (rnd() < 0.5) {
    const cx = CAMPUS.lat + (rnd() - 0.5) * 0.02;
    const cy = CAMPUS.lon + (rnd() - 0.5) * 0.02;
    const r = 0.002 + rnd() * 0.012;
    const n = 4 + Math.floor(rnd() * 5);
    const region: Array<[number, number]> = [];
    for (let i = 0; i < n; i++) {
      const angle = (2 * Math.PI * i) / n + rnd() * 0.3;
      const radius = r * (0.5 + rnd() * 0.5);
      region.push([cx + radius * Math.sin(angle), cy + radius * Math.cos(angle)]);
    }
    f.region = region;
  }
  if (!f.scooter_ids && f.from_ms === undefined && !f.region) f.scooter_ids = all;
  return f;
}

describe("map view consistency", () => {
  it("polyline count equals query_trips count for 10 random filters", async () => {
    const rnd = mulberry32(20250610);
    let nonEmpty = 0;
    for (let trial = 0; trial < 10; trial++) {
      const filter = randomFilter(rnd, trial);
      const trips = await admin.allTrips(filter);
      const geojson = trips.length
        ? await admin.tripsGeojson(trips.map((t) => t.trip_id))
        : { type: "FeatureCollection" as const, features: [] };
      const coords: Array<[number, number]> = [];
      for (const feat of geojson.features) {
        if (feat.geometry.type !== "LineString") continue;
        for (const [lon, lat] of feat.geometry.coordinates as Array<[number, number]>) coords.push([lat, lon]);
      }
      const viewport = fitViewport(coords, 840, 520);
      const paths = buildTripPaths(geojson, viewport);
      expect(paths.length).toBe(trips.length);
      if (trips.length) nonEmpty++;
    }
    expect(nonEmpty).toBeGreaterThanOrEqual(3); // the check must bite
  });

  it("polylines carry every fix the API returned", async () => {
    const trips = await admin.allTrips({ scooter_ids: ["scooter-01", "scooter-02", "scooter-03"] });
    expect(trips.length).toBeGreaterThan(0);
    const geojson = await admin.tripsGeojson(trips.map((t) => t.trip_id));
    const byId = new Map(trips.map((t) => [t.trip_id, t]));
    const viewport = fitViewport([[CAMPUS.lat, CAMPUS.lon]], 840, 520);
    for (const path of buildTripPaths(geojson, viewport)) {
      const summary = byId.get(path.tripId);
      expect(summary).toBeDefined();
      expect(path.vertices).toBe(summary!.sample_counts["gps"] ?? 0);
    }
  });
});

describe("stats view consistency", () => {
  it("chart bucket sums equal the table totals", async () => {
    const report = await admin.stats({ scooter_ids: ["scooter-01", "scooter-02", "scooter-03"] });
    expect(report.trip_count).toBeGreaterThan(0);
    const counts = buildChartModel(report, "count");
    expect(counts.bucketSum).toBe(report.trip_count);
    expect(counts.consistent).toBe(true);
    const dist = buildChartModel(report, "distance_m");
    expect(dist.bucketSum).toBeCloseTo(report.total_distance_m, 6);
    expect(dist.consistent).toBe(true);
  });

  it("exports download for the same filter the stats showed", async () => {
    const filter: TripFilterState = { scooter_ids: ["scooter-01"] };
    const report = await admin.stats(filter);
    const csv = await admin.exportBody(filter, "csv");
    const lines = csv.trim().split("\n");
    expect(lines[0].startsWith("trip_id,scooter_id,kind")).toBe(true);
    const trips = await admin.allTrips(filter);
    const sampleTotal = trips.reduce((acc, t) => acc + Object.values(t.sample_counts).reduce((a, b) => a + b, 0), 0);
    expect(lines.length - 1).toBe(sampleTotal);
    expect(report.trip_count).toBe(trips.filter((t) => !t.quality_flags.includes("EmptyTrip")).length);
  });
});

describe("project form validation parity", () => {
  it("blocks an over-cap rate client-side with the server's error code", async () => {
    const overCap: PolicyObj = {
      sensors: { gps: 50.0 },
      fence: null,
      schedule: { active_from: "2025-01-01", active_until: "2025-12-31", windows: [] },
    };
    const clientViolations = validatePolicy(overCap);
    expect(clientViolations).toHaveLength(1); // the form refuses to submit

    let serverCodes: string[] = [];
    try {
      await admin.createProject("should fail", overCap, ["scooter-01"]);
      throw new Error("server accepted an invalid policy");
    } catch (e) {
      expect(e).toBeInstanceOf(ApiError);
      const details = (e as ApiError).body.details as Array<{ code: string; kind?: string }>;
      serverCodes = details.map((d) => d.code);
      expect((e as ApiError).body.code).toBe("invalid_policy");
    }
    expect(serverCodes).toEqual(clientViolations.map((v) => v.code));
    expect(clientViolations[0].code).toBe("RateExceedsCap");
  });

  it("accepts a valid policy end-to-end and reports issued config versions", async () => {
    const policy: PolicyObj = {
      sensors: { gps: 2.0, temperature: 1.0 },
      fence: null,
      schedule: { active_from: "2025-01-01", active_until: "2025-12-31", windows: [] },
    };
    expect(validatePolicy(policy)).toEqual([]);
    const created = await admin.createProject("UI project", policy, ["scooter-01", "scooter-02"]);
    const activated = await admin.activateProject(created.project_id);
    expect(activated.state).toBe("active");
    expect(Object.keys(activated.issued_config_versions ?? {})).toEqual(["scooter-01", "scooter-02"]);
  });
});
