/** The Stats tool: summary table, per-day bar chart, per-scooter table. */

import { clear, h } from "../dom.js";
import type { StatsReport } from "../types.js";
import { buildChartModel, perScooterRows, summaryRows } from "./statsmodel.js";

export interface StatsHandlers {
  onMetricChange(metric: "count" | "distance_m"): void;
  onExport(format: "csv" | "geojson" | "jsonl"): void;
}

export function renderStats(
  container: HTMLElement,
  report: StatsReport,
  metric: "count" | "distance_m",
  handlers: StatsHandlers,
): void {
  clear(container);
  const chart = buildChartModel(report, metric);

  const summary = h("table", { class: "summary" });
  for (const r of summaryRows(report)) {
    summary.append(h("tr", {}, h("td", {}, r.label), h("td", {}, r.value)));
  }

  const barWidth = 26;
  const chartHeight = 180;
  const svg = h("svg", {
    width: Math.max(320, chart.bars.length * (barWidth + 8) + 40),
    height: chartHeight + 40,
    class: "chart",
  });
  chart.bars.forEach((bar, i) => {
    const x = 20 + i * (barWidth + 8);
    svg.append(
      h("rect", {
        x,
        y: chartHeight - bar.heightPx + 10,
        width: barWidth,
        height: bar.heightPx,
        class: "bar",
      }),
      h("text", { x: x + barWidth / 2, y: chartHeight + 24, class: "bar-label", "text-anchor": "middle" },
        bar.label.slice(5)),
      h("text", { x: x + barWidth / 2, y: chartHeight - bar.heightPx + 4, class: "bar-value", "text-anchor": "middle" },
        metric === "count" ? String(bar.value) : (bar.value / 1000).toFixed(1)),
    );
  });

  const scooters = h("table", { class: "per-scooter" }, h("tr", {}, h("th", {}, "Scooter"), h("th", {}, "Trips"), h("th", {}, "km")));
  for (const r of perScooterRows(report)) {
    scooters.append(h("tr", {}, h("td", {}, r.scooter), h("td", {}, String(r.count)), h("td", {}, r.km)));
  }

  container.append(
    h("div", { class: "stats-head" },
      h("h3", {}, "Stats"),
      h("label", {}, "Chart metric: ",
        metricSelect(metric, handlers)),
      h("span", { class: chart.consistent ? "ok" : "error" },
        chart.consistent ? "buckets reconcile" : "BUCKET MISMATCH"),
    ),
    summary,
    h("h4", {}, metric === "count" ? "Trips per day" : "Distance per day (km)"),
    svg,
    h("h4", {}, "Per scooter"),
    scooters,
    h("div", { class: "export-row" },
      ...(["csv", "geojson", "jsonl"] as const).map((fmt) =>
        h("button", { onclick: () => handlers.onExport(fmt) }, `Export ${fmt}`)),
    ),
  );
}

function metricSelect(metric: string, handlers: StatsHandlers): HTMLElement {
  const select = h("select", {
    onchange: (ev: Event) =>
      handlers.onMetricChange((ev.target as HTMLSelectElement).value as "count" | "distance_m"),
  });
  for (const value of ["count", "distance_m"]) {
    const opt = h("option", { value }, value === "count" ? "trip count" : "distance");
    if (value === metric) opt.setAttribute("selected", "");
    select.append(opt);
  }
  return select as HTMLElement;
}
