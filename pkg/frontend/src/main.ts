/** DOM wiring: tiles, controls, and the event feed. */

import { ApiClient } from "./api.js";
import { FeedButton, PumpSwitch } from "./controls.js";
import { EventFeed, isAlertRow } from "./events.js";
import { PanelStore, REFRESH_MS } from "./panel.js";
import { KIND_ORDER } from "./types.js";

const api = new ApiClient("");
const panel = new PanelStore({ fetchSnapshot: () => api.readings() });
const feedButton = new FeedButton((portions) => api.feed(portions));
const pumpSwitch = new PumpSwitch((on) => api.pump(on));
const feed = new EventFeed((params) => api.events(params));

const tilesEl = document.getElementById("tiles") as HTMLElement;
const eventsEl = document.getElementById("events") as HTMLElement;
const feedBtnEl = document.getElementById("feed-now") as HTMLButtonElement;
const feedMsgEl = document.getElementById("feed-message") as HTMLElement;
const pumpEl = document.getElementById("pump-switch") as HTMLInputElement;
const pumpMsgEl = document.getElementById("pump-message") as HTMLElement;
const connEl = document.getElementById("connectivity") as HTMLElement;
const feederEl = document.getElementById("feeder-total") as HTMLElement;

let renderedVersion = -1;

function fmt(value: number | null): string {
  return value === null ? "--" : value.toFixed(2);
}

function renderTiles(): void {
  const stale = panel.isStale();
  connEl.textContent = stale
    ? "disconnected - showing last known values"
    : `live - cycle ${panel.model.pollCycle ?? "?"}`;
  connEl.className = stale ? "conn stale" : "conn live";

  for (const kind of KIND_ORDER) {
    const tile = panel.model.tiles[kind];
    let el = document.getElementById(`tile-${kind}`);
    if (el === null) {
      el = document.createElement("div");
      el.id = `tile-${kind}`;
      tilesEl.appendChild(el);
    }
    const status = panel.tileStatus(kind);
    el.className = `tile ${status}`;
    el.innerHTML = `
      <div class="tile-label">${tile?.label ?? kind}</div>
      <div class="tile-value">${fmt(tile?.value ?? null)}
        <span class="tile-unit">${tile?.unit ?? ""}</span></div>`;
  }
  feederEl.textContent =
    `${panel.model.feederTotalG.toFixed(1)} g dispensed` +
    (panel.model.jamFlag ? " (jam!)" : "");
  if (!pumpEl.matches(":active") && pumpSwitch.displayed !== null) {
    pumpEl.checked = pumpSwitch.displayed;
  }
}

function renderEvents(): void {
  const tail = feed.items.slice(-200).reverse();
  eventsEl.innerHTML = tail
    .map((e) => {
      const cls = isAlertRow(e) ? "event alert" : "event";
      const what = summarize(e.payload);
      return `<div class="${cls}"><span class="ts">${e.timestamp}</span> ${what}</div>`;
    })
    .join("");
}

function summarize(payload: { type: string; [k: string]: unknown }): string {
  switch (payload.type) {
    case "alert": {
      const alert = payload.alert as { message: string };
      return payload.suppressed === true
        ? `suppressed: ${alert.message}`
        : `ALERT: ${alert.message}`;
    }
    case "sensor_snapshot":
      return "sensor snapshot";
    case "command":
      return `command: ${JSON.stringify(payload.command)}`;
    case "feed_result": {
      const ok = payload.ok === true;
      return ok
        ? `fed ${payload.dispensed_g} g`
        : `feed rejected (${payload.reason})`;
    }
    case "system_fault":
      return `fault: ${payload.fault}`;
    case "recovery_note":
      return `recovery: ${payload.note}`;
    default:
      return payload.type;
  }
}

feedBtnEl.addEventListener("click", () => {
  feedBtnEl.disabled = true;
  feedMsgEl.textContent = "feeding...";
  void feedButton.feedNow(1).then((outcome) => {
    feedBtnEl.disabled = false;
    switch (outcome.kind) {
      case "dispensed":
        feedMsgEl.textContent = `${outcome.grams.toFixed(1)} g dispensed`;
        feedMsgEl.className = "msg ok";
        break;
      case "low_food":
        feedMsgEl.textContent = "hopper low - refill food";
        feedMsgEl.className = "msg warn";
        break;
      case "busy":
        break;
      default:
        feedMsgEl.textContent = `feed failed: ${outcome.message}` +
          (outcome.retryable ? " (try again)" : "");
        feedMsgEl.className = "msg warn";
    }
  });
});

pumpEl.addEventListener("change", () => {
  const desired = pumpEl.checked;
  pumpEl.checked = pumpSwitch.displayed ?? !desired; // wait for the ack
  pumpEl.disabled = true;
  void pumpSwitch.toggle(desired).then((outcome) => {
    pumpEl.disabled = false;
    if (outcome.kind === "acknowledged") {
      pumpEl.checked = outcome.on;
      pumpMsgEl.textContent = outcome.on ? "pump on" : "pump off";
      pumpMsgEl.className = "msg ok";
    } else if (outcome.kind === "error") {
      pumpEl.checked = pumpSwitch.displayed ?? false;
      pumpMsgEl.textContent = `pump command failed: ${outcome.message}`;
      pumpMsgEl.className = "msg warn";
    }
  });
});

function renderLoop(): void {
  if (panel.version !== renderedVersion) {
    renderedVersion = panel.version;
    if (panel.model.pumpOn !== null) {
      pumpSwitch.syncFromSnapshot(panel.model.pumpOn);
    }
  }
  renderTiles();
  setTimeout(renderLoop, 500);
}

panel.startLoop();
renderLoop();

function eventLoop(): void {
  void feed.catchUp().then((added) => {
    if (added > 0) renderEvents();
    setTimeout(eventLoop, REFRESH_MS);
  });
}
eventLoop();
