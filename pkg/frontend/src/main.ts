/** Entry point. Configuration is one endpoint URL (plus an optional slippy
 * tile template); both can come from globals or localStorage, defaulting to
 * same-origin so the bundle works when served by the ramp static flag. */

import { mount } from "./app.js";

declare global {
  interface Window {
    SCOOTERLAB_API_URL?: string;
    SCOOTERLAB_TILE_URL?: string;
  }
}

const apiBase =
  window.SCOOTERLAB_API_URL ?? localStorage.getItem("scooterlab.api_url") ?? "";
const tileTemplate =
  window.SCOOTERLAB_TILE_URL ?? localStorage.getItem("scooterlab.tile_url");

mount(document.getElementById("app") as HTMLElement, apiBase, tileTemplate || null);
