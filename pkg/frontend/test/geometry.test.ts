import { describe, expect, it } from "vitest";

import {
  Viewport,
  buildGraticule,
  buildTripPaths,
  fitViewport,
  polygonIsSimple,
  project,
  unproject,
} from "../src/geometry.js";
import type { FeatureCollection } from "../src/types.js";

const VIEW: Viewport = { centerLat: 29.4241, centerLon: -98.4936, zoom: 14, width: 800, height: 500 };

describe("projection", () => {
  it("puts the viewport center mid-canvas", () => {
    const [x, y] = project(VIEW, VIEW.centerLat, VIEW.centerLon);
    expect(x).toBeCloseTo(400, 6);
    expect(y).toBeCloseTo(250, 6);
  });

  it("round-trips through unproject", () => {
    const [lat, lon] = unproject(VIEW, 123.4, 77.2);
    const [x, y] = project(VIEW, lat, lon);
    expect(x).toBeCloseTo(123.4, 6);
    expect(y).toBeCloseTo(77.2, 6);
  });

  it("keeps north up", () => {
    const [, yNorth] = project(VIEW, VIEW.centerLat + 0.01, VIEW.centerLon);
    const [, ySouth] = project(VIEW, VIEW.centerLat - 0.01, VIEW.centerLon);
    expect(yNorth).toBeLessThan(ySouth);
  });
});

function lineString(tripId: string, coords: Array<[number, number]>) {
  return {
    type: "Feature" as const,
    geometry: { type: "LineString", coordinates: coords },
    properties: { trip_id: tripId },
  };
}

describe("trip paths", () => {
  it("builds one polyline per LineString with all vertices", () => {
    const fc: FeatureCollection = {
      type: "FeatureCollection",
      features: [
        lineString("t1", [[-98.49, 29.42], [-98.49, 29.425], [-98.488, 29.428]]),
        lineString("t2", [[-98.5, 29.42], [-98.5, 29.43]]),
      ],
    };
    const paths = buildTripPaths(fc, VIEW);
    expect(paths).toHaveLength(2);
    expect(paths[0].vertices).toBe(3);
    expect(paths[0].d.startsWith("M")).toBe(true);
    expect(paths[0].d.match(/L/g)).toHaveLength(2);
  });

  it("ignores non-linestring features", () => {
    const fc: FeatureCollection = {
      type: "FeatureCollection",
      features: [
        lineString("t1", [[-98.49, 29.42], [-98.48, 29.43]]),
        { type: "Feature", geometry: { type: "Point", coordinates: [-98.49, 29.42] }, properties: {} },
      ],
    };
    expect(buildTripPaths(fc, VIEW)).toHaveLength(1);
  });

  it("renders an empty collection as zero polylines", () => {
    expect(buildTripPaths({ type: "FeatureCollection", features: [] }, VIEW)).toHaveLength(0);
  });
});

describe("offline base map", () => {
  it("draws a graticule without any network resource", () => {
    const grid = buildGraticule(VIEW);
    expect(grid.length).toBeGreaterThan(10);
    for (const d of grid) expect(d).toMatch(/^M.+L.+/);
  });
});

describe("fitViewport", () => {
  it("contains every coordinate with margin", () => {
    const coords: Array<[number, number]> = [
      [29.41, -98.51],
      [29.44, -98.47],
      [29.425, -98.49],
    ];
    const v = fitViewport(coords, 800, 500);
    for (const [lat, lon] of coords) {
      const [x, y] = project(v, lat, lon);
      expect(x).toBeGreaterThan(0);
      expect(x).toBeLessThan(800);
      expect(y).toBeGreaterThan(0);
      expect(y).toBeLessThan(500);
    }
  });
});

describe("polygon simplicity (mirrors the server fence rule)", () => {
  it("accepts a square", () => {
    expect(polygonIsSimple([[0, 0], [0, 1], [1, 1], [1, 0]])).toBe(true);
  });

  it("rejects a bowtie", () => {
    expect(polygonIsSimple([[0, 0], [1, 1], [1, 0], [0, 1]])).toBe(false);
  });

  it("rejects consecutive duplicates and degenerate rings", () => {
    expect(polygonIsSimple([[0, 0], [0, 0], [1, 1], [1, 0]])).toBe(false);
    expect(polygonIsSimple([[0, 0], [0, 1]])).toBe(false);
  });

  it("accepts a concave simple polygon", () => {
    expect(polygonIsSimple([[0, 0], [4, 0], [4, 3], [2, 1], [0, 3]])).toBe(true);
  });
});
