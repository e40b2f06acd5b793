/** View state and request sequencing.
 *
 * Each view keeps at most one interesting in-flight query; responses that
 * arrive for a superseded request are discarded by sequence number, so the
 * rendered data always corresponds to the filter currently shown.
 */

import type { TripFilterState } from "./types.js";
import type { Viewport } from "./geometry.js";

export class RequestSequencer {
  private latest = 0;

  issue(): number {
    return ++this.latest;
  }

  isCurrent(id: number): boolean {
    return id === this.latest;
  }
}

export interface ViewState {
  token: string;
  role: string;
  userId: string;
  selectedProject: string | null;
  filter: TripFilterState;
  viewport: Viewport;
  chartMetric: "count" | "distance_m";
  drawing: boolean;
  draft: Array<[number, number]>; // polygon vertices while drawing
}

export function initialViewState(width = 840, height = 520): ViewState {
  return {
    token: "",
    role: "",
    userId: "",
    selectedProject: null,
    filter: {},
    viewport: { centerLat: 29.4241, centerLon: -98.4936, zoom: 13, width, height },
    chartMetric: "count",
    drawing: false,
    draft: [],
  };
}

/** The filter actually sent to the API: exactly what the controls show. */
export function effectiveFilter(state: ViewState): TripFilterState {
  const f: TripFilterState = { ...state.filter };
  if (state.selectedProject) f.project_id = state.selectedProject;
  return f;
}
