// Dashboard wiring: SSE-fed alert table, route map, trace chart, device
// health, and the incident inject form. All data comes from /api/v1.

import { api, ApiError } from "./api.js";
import { drawTrace } from "./chart.js";
import {
  fmtAge,
  fmtDistance,
  fmtHealth,
  fmtKind,
  fmtRul,
  fmtTimestamp,
} from "./format.js";
import { renderMap } from "./map.js";
import { openStream } from "./sse.js";
import {
  applyEvent,
  countAlerts,
  emptyState,
  knownDevices,
  listAlerts,
  resync,
  type AlertFilter,
} from "./store.js";
import type { AlertDoc, InjectRequest, RouteDoc } from "./types.js";

const state = emptyState();
const filter: AlertFilter = { status: "all", domain: "all" };
let routes: RouteDoc[] = [];
let selectedRoute = "";
let selectedAlert = "";

function $(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node;
}

function setStatus(connected: boolean): void {
  const dot = $("conn-dot");
  dot.classList.toggle("up", connected);
  dot.title = connected ? "stream connected" : "stream reconnecting";
}

function flash(message: string, isError = false): void {
  const bar = $("flash");
  bar.textContent = message;
  bar.classList.toggle("error", isError);
  bar.classList.add("visible");
  window.setTimeout(() => bar.classList.remove("visible"), 4000);
}

// -- alerts table ------------------------------------------------------------

function alertRow(a: AlertDoc): HTMLTableRowElement {
  const tr = document.createElement("tr");
  tr.className = a.alert_id === selectedAlert ? "selected" : "";
  tr.dataset.alertId = a.alert_id;

  const sev = document.createElement("td");
  sev.innerHTML = `<span class="chip sev-${a.severity}">${a.severity}</span>`;
  const what = document.createElement("td");
  what.innerHTML =
    `<div class="kind">${fmtKind(a.kind)}</div>` +
    `<div class="summary" title="${a.summary}">${a.summary}</div>`;
  const where = document.createElement("td");
  where.textContent =
    a.position_m !== null ? `${a.route_or_device} @ ${fmtDistance(a.position_m)}` : a.route_or_device;
  const occ = document.createElement("td");
  occ.textContent = `×${a.occurrence_count}`;
  const age = document.createElement("td");
  age.textContent = fmtAge(Date.now(), a.updated_at);
  age.title = fmtTimestamp(a.updated_at);
  const status = document.createElement("td");
  status.innerHTML = `<span class="chip st-${a.status}">${a.status}</span>`;

  const actions = document.createElement("td");
  if (a.status === "open") {
    actions.append(actionButton("ack", () => transition(a.alert_id, "acknowledge")));
  }
  if (a.status !== "resolved") {
    actions.append(actionButton("resolve", () => transition(a.alert_id, "resolve")));
  }
  tr.append(sev, what, where, occ, age, status, actions);
  tr.addEventListener("click", () => {
    selectedAlert = a.alert_id;
    renderAlerts();
  });
  return tr;
}

function actionButton(label: string, onClick: () => void): HTMLButtonElement {
  const b = document.createElement("button");
  b.textContent = label;
  b.className = "mini";
  b.addEventListener("click", (ev) => {
    ev.stopPropagation();
    onClick();
  });
  return b;
}

async function transition(alertId: string, action: "acknowledge" | "resolve"): Promise<void> {
  try {
    const updated = await (action === "acknowledge"
      ? api.acknowledge(alertId)
      : api.resolve(alertId, "dashboard"));
    state.alerts.set(updated.alert_id, updated);
    renderAlerts();
    refreshMap();
  } catch (err) {
    flash(err instanceof ApiError ? `${err.code}: ${err.message}` : String(err), true);
  }
}

function renderAlerts(): void {
  const rows = listAlerts(state, filter);
  const tbody = $("alert-rows") as HTMLTableSectionElement;
  tbody.replaceChildren(...rows.map(alertRow));
  $("alert-empty").style.display = rows.length ? "none" : "block";

  const c = countAlerts(state);
  $("count-open").textContent = String(c.open);
  $("count-ack").textContent = String(c.acknowledged);
  $("count-resolved").textContent = String(c.resolved);
  const crit = $("count-critical");
  crit.textContent = String(c.critical);
  crit.parentElement?.classList.toggle("hot", c.critical > 0);
  renderDevices();
}

// -- map / trace / devices ----------------------------------------------------

async function refreshMap(): Promise<void> {
  try {
    const doc = await api.geojson();
    renderMap($("map") as unknown as SVGSVGElement, doc, (alertId) => {
      selectedAlert = alertId;
      renderAlerts();
    });
    $("map-warnings").textContent = (doc.warnings ?? []).join("; ");
  } catch {
    // transient; next refresh will catch up
  }
}

async function refreshTrace(): Promise<void> {
  if (!selectedRoute) return;
  try {
    const [trace, events] = await Promise.all([
      api.latestTrace(selectedRoute),
      api.latestEvents(selectedRoute),
    ]);
    drawTrace($("trace") as HTMLCanvasElement, trace, events.events);
    $("trace-meta").textContent =
      `${trace.samples.length} samples · captured ${fmtTimestamp(trace.captured_at)} · ` +
      `${events.events.length} event(s)`;
  } catch (err) {
    if (err instanceof ApiError && err.status === 404) {
      drawTrace($("trace") as HTMLCanvasElement, null, []);
      $("trace-meta").textContent = "no trace yet";
    }
  }
}

function renderDevices(): void {
  const ids = knownDevices(state);
  const manual = ($("device-input") as HTMLInputElement).value.trim();
  if (manual && !ids.includes(manual)) ids.push(manual);
  const list = $("device-list");
  if (ids.length === 0) {
    list.textContent = "no devices observed yet";
    return;
  }
  void Promise.all(
    ids.map(async (id) => {
      try {
        const h = await api.deviceHealth(id);
        return `<tr><td>${id}</td><td>${fmtHealth(h.health_index)}</td>` +
          `<td>${fmtRul(h.rul_hours)}</td><td>${h.slope_per_hour.toFixed(3)}/h</td></tr>`;
      } catch {
        return `<tr><td>${id}</td><td colspan="3" class="dim">no estimate</td></tr>`;
      }
    }),
  ).then((rows) => {
    list.innerHTML =
      `<table><thead><tr><th>device</th><th>health</th><th>RUL</th><th>slope</th></tr></thead>` +
      `<tbody>${rows.join("")}</tbody></table>`;
  });
}

// -- inject form ---------------------------------------------------------------

function injectFormSpec(): InjectRequest {
  const kind = ($("inj-kind") as HTMLSelectElement).value;
  const spec: InjectRequest = {
    incident_id: `ui-${Date.now().toString(36)}`,
    kind,
  };
  const magnitude = Number.parseFloat(($("inj-magnitude") as HTMLInputElement).value);
  if (Number.isFinite(magnitude)) spec.magnitude = magnitude;
  if (kind === "device_overheat") {
    spec.device_id = ($("inj-target") as HTMLInputElement).value.trim();
  } else if (kind === "login_burst") {
    spec.log_source = ($("inj-target") as HTMLInputElement).value.trim();
  } else {
    spec.route_id = ($("inj-route") as HTMLSelectElement).value;
    const pos = Number.parseFloat(($("inj-position") as HTMLInputElement).value);
    if (Number.isFinite(pos)) spec.position_m = pos;
  }
  return spec;
}

function syncInjectForm(): void {
  const kind = ($("inj-kind") as HTMLSelectElement).value;
  const fiber = !["device_overheat", "login_burst"].includes(kind);
  $("inj-fiber-fields").style.display = fiber ? "" : "none";
  $("inj-target-field").style.display = fiber ? "none" : "";
  ($("inj-target") as HTMLInputElement).placeholder =
    kind === "login_burst" ? "log source host" : "device id";
}

async function submitInject(ev: Event): Promise<void> {
  ev.preventDefault();
  try {
    const { incident_id } = await api.inject(injectFormSpec());
    flash(`incident ${incident_id} accepted`);
  } catch (err) {
    flash(err instanceof ApiError ? `${err.code}: ${err.message}` : String(err), true);
  }
}

// -- boot ---------------------------------------------------------------------

async function boot(): Promise<void> {
  try {
    const health = await api.health();
    $("version").textContent = `v${health.version}`;
  } catch {
    $("version").textContent = "api unreachable";
  }

  try {
    routes = (await api.routes()).routes;
  } catch {
    routes = [];
  }
  const routeSel = $("route-select") as HTMLSelectElement;
  const injRoute = $("inj-route") as HTMLSelectElement;
  for (const r of routes) {
    routeSel.add(new Option(`${r.route_id} (${fmtDistance(r.length_m)})`, r.route_id));
    injRoute.add(new Option(r.route_id, r.route_id));
  }
  selectedRoute = routes[0]?.route_id ?? "";
  routeSel.addEventListener("change", () => {
    selectedRoute = routeSel.value;
    void refreshTrace();
  });

  ($("filter-status") as HTMLSelectElement).addEventListener("change", (e) => {
    filter.status = (e.target as HTMLSelectElement).value as AlertFilter["status"];
    renderAlerts();
  });
  ($("filter-domain") as HTMLSelectElement).addEventListener("change", (e) => {
    filter.domain = (e.target as HTMLSelectElement).value as AlertFilter["domain"];
    renderAlerts();
  });
  $("inj-kind").addEventListener("change", syncInjectForm);
  $("inject-form").addEventListener("submit", (e) => void submitInject(e));
  $("device-input").addEventListener("change", renderDevices);
  syncInjectForm();

  openStream("/api/v1/stream", {
    onOpen: () => {
      setStatus(true);
      // the snapshot covers the gap, but a resync is cheap and exact
      void api.alerts().then(({ alerts }) => {
        resync(state, alerts);
        renderAlerts();
        void refreshMap();
      });
    },
    onEvent: (seq, payload) => {
      if (applyEvent(state, seq, payload)) {
        renderAlerts();
        void refreshMap();
      }
    },
    onDown: () => setStatus(false),
  });

  await refreshMap();
  await refreshTrace();
  window.setInterval(() => void refreshTrace(), 5000);
  window.setInterval(renderAlerts, 15000); // keep ages fresh
}

void boot();
