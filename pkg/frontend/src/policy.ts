/** Client-side policy validation mirroring the server's rules.
 *
 * Violation codes match the server's `invalid_policy` details exactly, so
 * a rejected form shows the same codes the API would return.
 */

import type { PolicyObj } from "./types.js";
import { polygonIsSimple } from "./geometry.js";

export interface PolicyViolation {
  code: "RateExceedsCap" | "EmptySensorSet" | "InvalidFence" | "InvalidSchedule" | "UnknownKind";
  message: string;
  kind?: string;
}

export const RATE_CAPS_HZ: Record<string, number> = {
  gyroscope: 100,
  accelerometer: 100,
  magnetometer: 100,
  gps: 10,
  temperature: 10,
  pressure: 10,
  humidity: 10,
  light: 10,
  camera: 2,
  microphone: 1,
};

export const SENSOR_KINDS = Object.keys(RATE_CAPS_HZ);

export function rateCapHz(kind: string): number {
  if (kind in RATE_CAPS_HZ) return RATE_CAPS_HZ[kind];
  if (/^custom:[a-z0-9_]+$/.test(kind)) return 100;
  return NaN;
}

export function validatePolicy(policy: PolicyObj): PolicyViolation[] {
  const out: PolicyViolation[] = [];
  const kinds = Object.keys(policy.sensors);
  if (kinds.length === 0) {
    out.push({ code: "EmptySensorSet", message: "policy enables no sensors" });
  }
  for (const kind of kinds.sort()) {
    const cap = rateCapHz(kind);
    const rate = policy.sensors[kind];
    if (Number.isNaN(cap)) {
      out.push({ code: "UnknownKind", message: `unknown sensor kind ${kind}`, kind });
    } else if (!(rate > 0)) {
      out.push({ code: "RateExceedsCap", message: `${kind} rate must be a positive number`, kind });
    } else if (rate > cap) {
      out.push({ code: "RateExceedsCap", message: `${kind} rate ${rate} Hz exceeds cap (max ${cap})`, kind });
    }
  }
  if (policy.fence) {
    for (const ring of policy.fence.rings) {
      const pts = ring.map((p) => [p.lat, p.lon] as [number, number]);
      if (pts.length < 3) {
        out.push({ code: "InvalidFence", message: "fence ring needs at least 3 vertices" });
      } else if (!polygonIsSimple(pts)) {
        out.push({ code: "InvalidFence", message: "fence ring is self-intersecting" });
      }
    }
  }
  const sched = policy.schedule;
  if (sched.active_from > sched.active_until) {
    out.push({ code: "InvalidSchedule", message: "active_from is after active_until" });
  }
  for (const w of sched.windows) {
    if (w.start >= w.end) {
      out.push({ code: "InvalidSchedule", message: `window ${w.start}-${w.end} needs start < end` });
    }
    if (!w.days.length) {
      out.push({ code: "InvalidSchedule", message: "window needs at least one weekday" });
    }
  }
  return out;
}
