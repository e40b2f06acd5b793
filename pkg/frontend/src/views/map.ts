/** The Map tool: trip polylines over a base map, with polygon selection.
 *
 * Base map: slippy tiles when a tile URL template is configured, otherwise
 * a blank graticule so nothing here ever needs the network.
 */

import { clear, h } from "../dom.js";
import {
  Viewport,
  buildGraticule,
  buildTripPaths,
  selectionPath,
  tilesFor,
  unproject,
} from "../geometry.js";
import type { FeatureCollection, TripSummary } from "../types.js";

export interface MapHandlers {
  onTripClick(tripId: string): void;
  onCanvasClick(lat: number, lon: number): void;
  onFinishPolygon(): void;
  onClearSelection(): void;
  onToggleDraw(): void;
}

export interface MapRenderInput {
  geojson: FeatureCollection;
  summaries: Map<string, TripSummary>;
  viewport: Viewport;
  selection: Array<[number, number]>;
  drawing: boolean;
  tileUrlTemplate: string | null;
  selectedTrip: TripSummary | null;
}

export function renderMap(container: HTMLElement, input: MapRenderInput, handlers: MapHandlers): number {
  clear(container);
  const v = input.viewport;
  const paths = buildTripPaths(input.geojson, v, input.summaries);

  const svg = h("svg", {
    width: v.width,
    height: v.height,
    viewBox: `0 0 ${v.width} ${v.height}`,
    class: "map-canvas",
    onclick: (ev: Event) => {
      if (!input.drawing) return;
      const rect = (svg as SVGSVGElement).getBoundingClientRect();
      const me = ev as MouseEvent;
      const [lat, lon] = unproject(v, me.clientX - rect.left, me.clientY - rect.top);
      handlers.onCanvasClick(lat, lon);
    },
  });
  svg.append(h("rect", { x: 0, y: 0, width: v.width, height: v.height, class: "map-bg" }));

  if (input.tileUrlTemplate) {
    const layer = h("g", { class: "tiles" });
    for (const t of tilesFor(v)) {
      const href = input.tileUrlTemplate
        .replace("{z}", String(t.z))
        .replace("{x}", String(t.x))
        .replace("{y}", String(t.y));
      layer.append(h("image", { href, x: t.px, y: t.py, width: 256, height: 256 }));
    }
    svg.append(layer);
  } else {
    const grid = h("g", { class: "graticule" });
    for (const d of buildGraticule(v)) grid.append(h("path", { d }));
    svg.append(grid);
  }

  const lines = h("g", { class: "trips" });
  for (const p of paths) {
    lines.append(
      h("path", {
        d: p.d,
        class: "trip-line",
        "data-trip": p.tripId,
        onclick: (ev: Event) => {
          ev.stopPropagation();
          handlers.onTripClick(p.tripId);
        },
      }),
    );
  }
  svg.append(lines);

  const sel = selectionPath(v, input.selection);
  if (sel) svg.append(h("path", { d: sel, class: "selection" }));

  const toolbar = h(
    "div",
    { class: "map-toolbar" },
    h("button", { onclick: () => handlers.onToggleDraw() }, input.drawing ? "Drawing… (click map)" : "Draw region"),
    h("button", { onclick: () => handlers.onFinishPolygon(), disabled: !input.drawing }, "Apply region"),
    h("button", { onclick: () => handlers.onClearSelection() }, "Clear region"),
    h("span", { class: "map-count" }, `${paths.length} trips`),
  );

  container.append(toolbar, svg, renderTripPanel(input.selectedTrip));
  return paths.length;
}

function renderTripPanel(trip: TripSummary | null): HTMLElement {
  const panel = h("div", { class: "trip-panel" }) as HTMLElement;
  if (!trip) {
    panel.append(h("p", { class: "muted" }, "Click a trip for details."));
    return panel;
  }
  const started = new Date(trip.started_at).toISOString();
  panel.append(
    h("h3", {}, trip.trip_id),
    h(
      "table",
      {},
      row("Scooter", trip.scooter_id),
      row("Started", started),
      row("Duration", `${trip.duration_s.toFixed(0)} s`),
      row("Distance", `${trip.distance_m.toFixed(1)} m`),
      row("Flags", trip.quality_flags.join(", ") || "none"),
    ),
    h("h4", {}, "Samples by kind"),
    h(
      "table",
      {},
      ...Object.entries(trip.sample_counts).map(([kind, n]) => row(kind, String(n))),
    ),
    h("h4", {}, "Enrichment"),
    trip.enrichment.length
      ? h(
          "table",
          {},
          ...trip.enrichment.map((r) =>
            row(
              `${r.source} @ ${r.valid_for.cell} h${r.valid_for.hour_utc}`,
              `${r.status} ${JSON.stringify(r.payload)}`,
            ),
          ),
        )
      : h("p", { class: "muted" }, "no records"),
  );
  return panel;
}

function row(label: string, value: string): HTMLElement {
  return h("tr", {}, h("td", {}, label), h("td", {}, value)) as HTMLElement;
}
