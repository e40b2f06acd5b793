/** Map math: Web Mercator projection, SVG path building, polygon checks.
 *
 * The render model is computed here as pure data so views (and tests) can
 * count polylines and vertices without a DOM.
 */

import type { FeatureCollection, TripSummary } from "./types.js";

export interface Viewport {
  centerLat: number;
  centerLon: number;
  zoom: number; // slippy zoom level
  width: number; // px
  height: number; // px
}

const TILE = 256;

export function mercator(lat: number, lon: number, zoom: number): [number, number] {
  const scale = TILE * Math.pow(2, zoom);
  const x = ((lon + 180) / 360) * scale;
  const rad = (lat * Math.PI) / 180;
  const y = ((1 - Math.log(Math.tan(rad) + 1 / Math.cos(rad)) / Math.PI) / 2) * scale;
  return [x, y];
}

export function unmercator(x: number, y: number, zoom: number): [number, number] {
  const scale = TILE * Math.pow(2, zoom);
  const lon = (x / scale) * 360 - 180;
  const n = Math.PI - (2 * Math.PI * y) / scale;
  const lat = (180 / Math.PI) * Math.atan(0.5 * (Math.exp(n) - Math.exp(-n)));
  return [lat, lon];
}

export function project(v: Viewport, lat: number, lon: number): [number, number] {
  const [cx, cy] = mercator(v.centerLat, v.centerLon, v.zoom);
  const [x, y] = mercator(lat, lon, v.zoom);
  return [x - cx + v.width / 2, y - cy + v.height / 2];
}

export function unproject(v: Viewport, px: number, py: number): [number, number] {
  const [cx, cy] = mercator(v.centerLat, v.centerLon, v.zoom);
  return unmercator(px + cx - v.width / 2, py + cy - v.height / 2, v.zoom);
}

function pathFrom(points: Array<[number, number]>, close = false): string {
  if (!points.length) return "";
  const cmds = points.map(([x, y], i) => `${i === 0 ? "M" : "L"}${x.toFixed(1)},${y.toFixed(1)}`);
  return cmds.join(" ") + (close ? " Z" : "");
}

export interface TripPath {
  tripId: string;
  d: string;
  vertices: number;
  summary: TripSummary | null;
}

export interface MapModel {
  paths: TripPath[];
  graticule: string[]; // one path per meridian/parallel, the offline base map
  selection: string; // current selection polygon as a path, "" when none
}

/** One polyline per LineString feature, in feature order. */
export function buildTripPaths(
  fc: FeatureCollection,
  viewport: Viewport,
  summaries: Map<string, TripSummary> = new Map(),
): TripPath[] {
  const out: TripPath[] = [];
  for (const feature of fc.features) {
    if (feature.geometry.type !== "LineString") continue;
    const coords = feature.geometry.coordinates as Array<[number, number]>;
    const pts = coords.map(([lon, lat]) => project(viewport, lat, lon));
    const tripId = String(feature.properties["trip_id"] ?? "");
    out.push({
      tripId,
      d: pathFrom(pts),
      vertices: pts.length,
      summary: summaries.get(tripId) ?? null,
    });
  }
  return out;
}

/** Meridians/parallels at a spacing that fits the viewport, as SVG paths. */
export function buildGraticule(v: Viewport, lines = 8): string[] {
  const [latN, lonW] = unproject(v, 0, 0);
  const [latS, lonE] = unproject(v, v.width, v.height);
  const out: string[] = [];
  const lonStep = (lonE - lonW) / lines;
  const latStep = (latN - latS) / lines;
  for (let i = 0; i <= lines; i++) {
    const lon = lonW + i * lonStep;
    out.push(pathFrom([project(v, latN, lon), project(v, latS, lon)]));
    const lat = latS + i * latStep;
    out.push(pathFrom([project(v, lat, lonW), project(v, lat, lonE)]));
  }
  return out;
}

export function selectionPath(v: Viewport, region: Array<[number, number]>): string {
  if (region.length < 2) return "";
  return pathFrom(
    region.map(([lat, lon]) => project(v, lat, lon)),
    region.length >= 3,
  );
}

/** Bounding viewport that fits all coordinates with a margin. */
export function fitViewport(coords: Array<[number, number]>, width: number, height: number): Viewport {
  if (!coords.length) return { centerLat: 29.4241, centerLon: -98.4936, zoom: 13, width, height };
  const lats = coords.map((c) => c[0]);
  const lons = coords.map((c) => c[1]);
  const centerLat = (Math.min(...lats) + Math.max(...lats)) / 2;
  const centerLon = (Math.min(...lons) + Math.max(...lons)) / 2;
  let zoom = 18;
  while (zoom > 2) {
    const v = { centerLat, centerLon, zoom, width, height };
    const pts = coords.map(([lat, lon]) => project(v, lat, lon));
    const inside = pts.every(([x, y]) => x > 24 && x < width - 24 && y > 24 && y < height - 24);
    if (inside) break;
    zoom -= 1;
  }
  return { centerLat, centerLon, zoom, width, height };
}

// ---- polygon drawing support ----

type Pt = [number, number];

function orient(a: Pt, b: Pt, c: Pt): number {
  const v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]);
  return v === 0 ? 0 : v > 0 ? 1 : -1;
}

function properCross(p1: Pt, p2: Pt, p3: Pt, p4: Pt): boolean {
  const o1 = orient(p1, p2, p3);
  const o2 = orient(p1, p2, p4);
  const o3 = orient(p3, p4, p1);
  const o4 = orient(p3, p4, p2);
  return o1 !== o2 && o3 !== o4 && o1 !== 0 && o2 !== 0 && o3 !== 0 && o4 !== 0;
}

/** Simple-polygon test matching the server's fence validation rule:
 *  at least 3 distinct vertices, no consecutive duplicates, and no two
 *  non-adjacent edges properly crossing. */
export function polygonIsSimple(ring: Pt[]): boolean {
  const n = ring.length;
  if (new Set(ring.map((p) => `${p[0]}:${p[1]}`)).size < 3) return false;
  for (let i = 0; i < n; i++) {
    const a = ring[i];
    const b = ring[(i + 1) % n];
    if (a[0] === b[0] && a[1] === b[1]) return false;
  }
  for (let i = 0; i < n; i++) {
    for (let j = i + 1; j < n; j++) {
      if ((j + 1) % n === i || (i + 1) % n === j) continue;
      if (properCross(ring[i], ring[(i + 1) % n], ring[j], ring[(j + 1) % n])) return false;
    }
  }
  return true;
}

/** Slippy tile addresses covering a viewport (when a tile URL is set). */
export function tilesFor(v: Viewport): Array<{ z: number; x: number; y: number; px: number; py: number }> {
  const z = Math.round(v.zoom);
  const [cx, cy] = mercator(v.centerLat, v.centerLon, z);
  const x0 = cx - v.width / 2;
  const y0 = cy - v.height / 2;
  const out = [];
  const max = Math.pow(2, z);
  for (let tx = Math.floor(x0 / TILE); tx * TILE < x0 + v.width; tx++) {
    for (let ty = Math.floor(y0 / TILE); ty * TILE < y0 + v.height; ty++) {
      if (ty < 0 || ty >= max) continue;
      out.push({ z, x: ((tx % max) + max) % max, y: ty, px: tx * TILE - x0, py: ty * TILE - y0 });
    }
  }
  return out;
}
