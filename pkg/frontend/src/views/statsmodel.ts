/** Pure view-model for the stats tool: tables and the per-day bar chart.
 *
 * Numbers come from the API verbatim; the only client-side arithmetic is
 * the bucket summation used to cross-check the displayed totals.
 */

import type { StatsReport } from "../types.js";

export interface ChartBar {
  label: string;
  value: number;
  heightPx: number;
}

export interface ChartModel {
  bars: ChartBar[];
  metric: "count" | "distance_m";
  bucketSum: number;
  reportedTotal: number;
  consistent: boolean;
}

export function buildChartModel(report: StatsReport, metric: "count" | "distance_m", maxHeightPx = 160): ChartModel {
  const days = Object.keys(report.per_day).sort();
  const values = days.map((d) => report.per_day[d][metric]);
  const peak = Math.max(1e-9, ...values);
  const bars = days.map((day, i) => ({
    label: day,
    value: values[i],
    heightPx: Math.round((values[i] / peak) * maxHeightPx),
  }));
  const bucketSum = values.reduce((a, b) => a + b, 0);
  const reportedTotal = metric === "count" ? report.trip_count : report.total_distance_m;
  return {
    bars,
    metric,
    bucketSum,
    reportedTotal,
    consistent: metric === "count" ? bucketSum === reportedTotal : Math.abs(bucketSum - reportedTotal) < 1e-6,
  };
}

export interface SummaryRow {
  label: string;
  value: string;
}

export function summaryRows(report: StatsReport): SummaryRow[] {
  return [
    { label: "Trips", value: String(report.trip_count) },
    { label: "Total distance", value: `${(report.total_distance_m / 1000).toFixed(2)} km` },
    { label: "Total ride time", value: `${(report.total_duration_s / 60).toFixed(1)} min` },
    { label: "Mean speed", value: `${report.mean_speed_mps.toFixed(2)} m/s` },
  ];
}

export function perScooterRows(report: StatsReport): Array<{ scooter: string; count: number; km: string }> {
  return Object.keys(report.per_scooter)
    .sort()
    .map((sid) => ({
      scooter: sid,
      count: report.per_scooter[sid].count,
      km: (report.per_scooter[sid].distance_m / 1000).toFixed(2),
    }));
}
