/** Project form: sensors + rates, fence from the drawn polygon, schedule,
 * fleet selection. Validation mirrors the server; violations render inline
 * with the same codes the API would return. */

import { clear, h } from "../dom.js";
import { SENSOR_KINDS, rateCapHz, validatePolicy } from "../policy.js";
import type { PolicyObj } from "../types.js";

export interface ProjectFormState {
  scooters: string[]; // known fleet (from the battery endpoint)
  drawnRegion: Array<[number, number]>; // map selection, offered as the fence
  violations: Array<{ code: string; message: string; kind?: string }>;
  serverError: string;
  lastCreated: { project_id: string; issued?: Record<string, number> } | null;
}

export interface ProjectHandlers {
  onSubmit(title: string, policy: PolicyObj, fleet: string[]): void;
  onValidate(policy: PolicyObj): void;
}

export function readPolicyFromForm(form: HTMLElement, drawnRegion: Array<[number, number]>): PolicyObj {
  const sensors: Record<string, number> = {};
  for (const kind of SENSOR_KINDS) {
    const enabled = form.querySelector<HTMLInputElement>(`input[name="enable-${kind}"]`);
    const rate = form.querySelector<HTMLInputElement>(`input[name="rate-${kind}"]`);
    if (enabled?.checked && rate) sensors[kind] = Number(rate.value);
  }
  const useFence = form.querySelector<HTMLInputElement>('input[name="use-fence"]')?.checked;
  const days: string[] = [];
  for (const day of ["mon", "tue", "wed", "thu", "fri", "sat", "sun"]) {
    if (form.querySelector<HTMLInputElement>(`input[name="day-${day}"]`)?.checked) days.push(day);
  }
  const val = (name: string, fallback: string) =>
    form.querySelector<HTMLInputElement>(`input[name="${name}"]`)?.value || fallback;
  const windows =
    days.length > 0
      ? [{ days, start: val("win-start", "08:00"), end: val("win-end", "18:00"), tz: val("win-tz", "UTC") }]
      : [];
  return {
    sensors,
    fence:
      useFence && drawnRegion.length >= 3
        ? { rings: [drawnRegion.map(([lat, lon]) => ({ lat, lon }))] }
        : null,
    schedule: {
      active_from: val("active-from", "2025-01-01"),
      active_until: val("active-until", "2025-12-31"),
      windows,
    },
  };
}

export function renderProjectForm(container: HTMLElement, state: ProjectFormState, handlers: ProjectHandlers): void {
  clear(container);
  const form = h("form", {
    class: "project-form",
    onsubmit: (ev: Event) => {
      ev.preventDefault();
      const policy = readPolicyFromForm(form as HTMLElement, state.drawnRegion);
      const title = (form.querySelector('input[name="title"]') as HTMLInputElement).value || "untitled";
      const fleet = state.scooters.filter(
        (sid) => form.querySelector<HTMLInputElement>(`input[name="fleet-${sid}"]`)?.checked,
      );
      if (validatePolicy(policy).length === 0) {
        handlers.onSubmit(title, policy, fleet);
      } else {
        handlers.onValidate(policy); // surfaces inline violations, blocks submit
      }
    },
    oninput: () => handlers.onValidate(readPolicyFromForm(form as HTMLElement, state.drawnRegion)),
  }) as HTMLFormElement;

  form.append(h("label", {}, "Title ", h("input", { name: "title", type: "text", required: true })));

  const sensorBox = h("fieldset", {}, h("legend", {}, "Sensors"));
  for (const kind of SENSOR_KINDS) {
    const violation = state.violations.find((v) => v.kind === kind);
    sensorBox.append(
      h(
        "div",
        { class: `sensor-row ${violation ? "invalid" : ""}` },
        h("label", {},
          h("input", { name: `enable-${kind}`, type: "checkbox" }),
          ` ${kind} `,
        ),
        h("input", { name: `rate-${kind}`, type: "number", step: "0.1", value: "1", min: "0" }),
        h("span", { class: "muted" }, ` Hz (cap ${rateCapHz(kind)})`),
        violation ? h("span", { class: "error inline-error" }, ` ${violation.code}: ${violation.message}`) : null,
      ),
    );
  }
  form.append(sensorBox);

  form.append(
    h("fieldset", {},
      h("legend", {}, "Geofence"),
      h("label", {},
        h("input", { name: "use-fence", type: "checkbox", disabled: state.drawnRegion.length < 3 }),
        state.drawnRegion.length >= 3
          ? ` use the drawn region (${state.drawnRegion.length} vertices)`
          : " draw a region on the map first",
      ),
    ),
    h("fieldset", {},
      h("legend", {}, "Schedule"),
      h("label", {}, "From ", h("input", { name: "active-from", type: "date", value: "2025-01-01" })),
      h("label", {}, "Until ", h("input", { name: "active-until", type: "date", value: "2025-12-31" })),
      h("div", {},
        ...["mon", "tue", "wed", "thu", "fri", "sat", "sun"].map((day) =>
          h("label", { class: "day" }, h("input", { name: `day-${day}`, type: "checkbox" }), day),
        ),
      ),
      h("label", {}, "Window ", h("input", { name: "win-start", type: "time", value: "08:00" }),
        " to ", h("input", { name: "win-end", type: "time", value: "18:00" }),
        " tz ", h("input", { name: "win-tz", type: "text", value: "UTC", size: 16 })),
    ),
    h("fieldset", {},
      h("legend", {}, "Fleet"),
      ...state.scooters.map((sid) =>
        h("label", { class: "fleet" }, h("input", { name: `fleet-${sid}`, type: "checkbox" }), sid),
      ),
    ),
  );

  const general = state.violations.filter((v) => !v.kind);
  if (general.length) {
    form.append(
      h("ul", { class: "error" }, ...general.map((v) => h("li", {}, `${v.code}: ${v.message}`))),
    );
  }
  if (state.serverError) form.append(h("p", { class: "error" }, state.serverError));
  if (state.lastCreated) {
    form.append(
      h("p", { class: "ok" },
        `created ${state.lastCreated.project_id}` +
          (state.lastCreated.issued ? `, configs ${JSON.stringify(state.lastCreated.issued)}` : "")),
    );
  }
  form.append(
    h("button", { type: "submit", disabled: state.violations.length > 0 }, "Create & activate project"),
  );
  container.append(form);
}
