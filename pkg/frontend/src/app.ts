/** Portal wiring: auth, tabs, the fetch/render cycle for each tool.
 *
 * One in-flight query per view; stale responses are dropped by sequence
 * number. On API failure a banner appears and the previous layer stays.
 */

import { ApiClient, ApiError } from "./api.js";
import { banner, clear, h } from "./dom.js";
import { fitViewport, polygonIsSimple } from "./geometry.js";
import { validatePolicy } from "./policy.js";
import { RequestSequencer, ViewState, effectiveFilter, initialViewState } from "./state.js";
import type { FeatureCollection, PolicyObj, StatsReport, TripSummary } from "./types.js";
import { renderMap } from "./views/map.js";
import { ProjectFormState, renderProjectForm } from "./views/project.js";
import { renderStats } from "./views/stats.js";

interface Els {
  banner: HTMLElement;
  auth: HTMLElement;
  projects: HTMLElement;
  map: HTMLElement;
  stats: HTMLElement;
  form: HTMLElement;
}

export class App {
  state: ViewState = initialViewState();
  private seq = new RequestSequencer();
  private lastGeojson: FeatureCollection = { type: "FeatureCollection", features: [] };
  private lastSummaries = new Map<string, TripSummary>();
  private lastStats: StatsReport | null = null;
  private selectedTrip: TripSummary | null = null;
  private formState: ProjectFormState = {
    scooters: [],
    drawnRegion: [],
    violations: [],
    serverError: "",
    lastCreated: null,
  };

  constructor(
    public api: ApiClient,
    private els: Els,
    private tileUrlTemplate: string | null = null,
  ) {}

  // ---- auth ----

  renderAuth(): void {
    clear(this.els.auth);
    if (this.state.token) {
      this.els.auth.append(
        h("span", {}, `signed in as ${this.state.userId || "token"} (${this.state.role || "?"}) `),
        h("button", { onclick: () => this.signOut() }, "Sign out"),
      );
      return;
    }
    const name = h("input", { placeholder: "user", name: "login-name" }) as HTMLInputElement;
    const cred = h("input", { placeholder: "credential", type: "password", name: "login-cred" }) as HTMLInputElement;
    const token = h("input", { placeholder: "or paste a bearer token", name: "login-token", size: 28 }) as HTMLInputElement;
    this.els.auth.append(
      name, cred,
      h("button", { onclick: () => void this.login(name.value, cred.value) }, "Sign in"),
      h("span", { class: "muted" }, " — "),
      token,
      h("button", { onclick: () => this.useToken(token.value) }, "Use token"),
    );
  }

  async login(name: string, credential: string): Promise<void> {
    try {
      const session = await this.api.login(name, credential);
      this.api.token = session.token;
      this.state.token = session.token;
      this.state.role = session.role;
      this.state.userId = session.user_id;
      banner(this.els.banner, "", "info");
      this.renderAuth();
      await this.bootstrap();
    } catch (e) {
      this.showError(e);
    }
  }

  useToken(token: string): void {
    this.api.token = token;
    this.state.token = token;
    this.state.role = "admin";
    this.state.userId = "";
    this.renderAuth();
    void this.bootstrap();
  }

  signOut(): void {
    this.api.token = "";
    this.state = initialViewState(this.state.viewport.width, this.state.viewport.height);
    this.renderAuth();
    clear(this.els.projects);
    clear(this.els.map);
    clear(this.els.stats);
    clear(this.els.form);
  }

  // ---- data cycle ----

  async bootstrap(): Promise<void> {
    await Promise.all([this.loadProjects(), this.loadFleet()]);
    await this.refresh();
  }

  async loadProjects(): Promise<void> {
    try {
      const { projects } = await this.api.listProjects();
      clear(this.els.projects);
      const select = h("select", {
        onchange: (ev: Event) => {
          const value = (ev.target as HTMLSelectElement).value;
          this.state.selectedProject = value || null;
          void this.refresh();
        },
      });
      select.append(h("option", { value: "" }, "(all my projects)"));
      for (const p of projects) {
        const opt = h("option", { value: p.project_id }, `${p.project_id} ${p.title} [${p.state}]`);
        if (p.project_id === this.state.selectedProject) opt.setAttribute("selected", "");
        select.append(opt);
      }
      this.els.projects.append(h("label", {}, "Project: "), select);
    } catch (e) {
      this.showError(e);
    }
  }

  async loadFleet(): Promise<void> {
    try {
      const { scooters } = await this.api.battery();
      this.formState.scooters = scooters.map((s) => s.scooter_id);
      this.renderForm();
    } catch (e) {
      this.showError(e);
    }
  }

  async refresh(): Promise<void> {
    const id = this.seq.issue();
    const filter = effectiveFilter(this.state);
    try {
      const trips = Object.keys(filter).length ? await this.api.allTrips(filter) : [];
      const geojson = trips.length
        ? await this.api.tripsGeojson(trips.map((t) => t.trip_id))
        : ({ type: "FeatureCollection", features: [] } as FeatureCollection);
      const stats = Object.keys(filter).length ? await this.api.stats(filter) : null;
      if (!this.seq.isCurrent(id)) return; // superseded; keep newer state
      this.lastSummaries = new Map(trips.map((t) => [t.trip_id, t]));
      this.lastGeojson = geojson;
      this.lastStats = stats;
      if (trips.length) {
        const coords: Array<[number, number]> = [];
        for (const f of geojson.features) {
          if (f.geometry.type !== "LineString") continue;
          for (const [lon, lat] of f.geometry.coordinates as Array<[number, number]>) coords.push([lat, lon]);
        }
        if (coords.length) {
          this.state.viewport = fitViewport(coords, this.state.viewport.width, this.state.viewport.height);
        }
      }
      banner(this.els.banner, "", "info");
    } catch (e) {
      if (this.seq.isCurrent(id)) this.showError(e); // previous layer retained
      return;
    }
    this.renderMapView();
    this.renderStatsView();
  }

  // ---- map ----

  renderMapView(): number {
    return renderMap(
      this.els.map,
      {
        geojson: this.lastGeojson,
        summaries: this.lastSummaries,
        viewport: this.state.viewport,
        selection: this.state.drawing ? this.state.draft : this.state.filter.region ?? [],
        drawing: this.state.drawing,
        tileUrlTemplate: this.tileUrlTemplate,
        selectedTrip: this.selectedTrip,
      },
      {
        onTripClick: (tripId) => {
          this.selectedTrip = this.lastSummaries.get(tripId) ?? null;
          this.renderMapView();
        },
        onCanvasClick: (lat, lon) => {
          this.state.draft.push([lat, lon]);
          this.renderMapView();
        },
        onToggleDraw: () => {
          this.state.drawing = !this.state.drawing;
          this.state.draft = [];
          this.renderMapView();
        },
        onFinishPolygon: () => {
          if (this.state.draft.length < 3 || !polygonIsSimple(this.state.draft)) {
            banner(this.els.banner, "selection must be a simple polygon with at least 3 vertices");
            return;
          }
          this.state.filter = { ...this.state.filter, region: [...this.state.draft] };
          this.formState.drawnRegion = [...this.state.draft];
          this.state.drawing = false;
          this.state.draft = [];
          this.renderForm();
          void this.refresh();
        },
        onClearSelection: () => {
          const { region, ...rest } = this.state.filter;
          this.state.filter = rest;
          this.state.drawing = false;
          this.state.draft = [];
          void this.refresh();
        },
      },
    );
  }

  // ---- stats ----

  renderStatsView(): void {
    if (!this.lastStats) {
      clear(this.els.stats);
      this.els.stats.append(h("p", { class: "muted" }, "Select a project or draw a region to see stats."));
      return;
    }
    renderStats(this.els.stats, this.lastStats, this.state.chartMetric, {
      onMetricChange: (metric) => {
        this.state.chartMetric = metric;
        this.renderStatsView();
      },
      onExport: (format) => void this.download(format),
    });
  }

  async download(format: "csv" | "geojson" | "jsonl"): Promise<void> {
    try {
      const body = await this.api.exportBody(effectiveFilter(this.state), format);
      const blob = new Blob([body], { type: "application/octet-stream" });
      const a = h("a", { href: URL.createObjectURL(blob), download: `trips.${format}` }) as HTMLAnchorElement;
      a.click();
      URL.revokeObjectURL(a.href);
    } catch (e) {
      this.showError(e);
    }
  }

  // ---- project form ----

  renderForm(): void {
    renderProjectForm(this.els.form, this.formState, {
      onValidate: (policy: PolicyObj) => {
        this.formState.violations = validatePolicy(policy);
        this.formState.serverError = "";
        this.renderForm();
      },
      onSubmit: (title, policy, fleet) => void this.submitProject(title, policy, fleet),
    });
  }

  async submitProject(title: string, policy: PolicyObj, fleet: string[]): Promise<void> {
    this.formState.serverError = "";
    try {
      const created = await this.api.createProject(title, policy, fleet);
      const activated = await this.api.activateProject(created.project_id);
      this.formState.lastCreated = {
        project_id: created.project_id,
        issued: activated.issued_config_versions,
      };
      this.state.selectedProject = created.project_id;
      await this.loadProjects();
      await this.refresh();
    } catch (e) {
      if (e instanceof ApiError) {
        this.formState.serverError = `${e.body.code}: ${e.body.message} ${JSON.stringify(e.body.details ?? "")}`;
      } else {
        this.formState.serverError = String(e);
      }
    }
    this.renderForm();
  }

  private showError(e: unknown): void {
    const text = e instanceof ApiError ? `${e.body.code}: ${e.body.message}` : String(e);
    banner(this.els.banner, text);
  }
}

export function mount(root: HTMLElement, apiBaseUrl: string, tileUrlTemplate: string | null): App {
  const els: Els = {
    banner: h("div", { class: "banner" }) as HTMLElement,
    auth: h("div", { class: "auth" }) as HTMLElement,
    projects: h("div", { class: "projects" }) as HTMLElement,
    map: h("div", { class: "panel map" }) as HTMLElement,
    stats: h("div", { class: "panel stats" }) as HTMLElement,
    form: h("div", { class: "panel form" }) as HTMLElement,
  };
  root.append(
    h("header", {}, h("h1", {}, "ScooterLab portal"), els.auth),
    els.banner,
    els.projects,
    h("main", {}, els.map, h("div", { class: "side" }, els.stats, els.form)),
  );
  const app = new App(new ApiClient(apiBaseUrl), els, tileUrlTemplate);
  app.renderAuth();
  return app;
}
