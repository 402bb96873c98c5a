// SVG route map: LineString features as polylines, alert Points as pins.
// Rebuilt from scratch on each refresh; the collection is tiny.

import { makeProjection, lonLatBounds } from "./geometry.js";
import type { GeoJsonDoc, GeoJsonFeature } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

const PIN_COLORS: Record<string, string> = {
  critical: "#f4523b",
  major: "#e8b33d",
  minor: "#53b1fd",
  info: "#8fa3b8",
};

function el(name: string, attrs: Record<string, string>): SVGElement {
  const node = document.createElementNS(SVG_NS, name);
  for (const [k, v] of Object.entries(attrs)) node.setAttribute(k, v);
  return node;
}

function allCoords(features: GeoJsonFeature[]): [number, number][] {
  const out: [number, number][] = [];
  for (const f of features) {
    if (f.geometry.type === "LineString") out.push(...f.geometry.coordinates);
    else out.push(f.geometry.coordinates);
  }
  return out;
}

export function renderMap(
  svg: SVGSVGElement,
  doc: GeoJsonDoc,
  onPinClick?: (alertId: string) => void,
): void {
  svg.replaceChildren();
  const width = svg.clientWidth || 420;
  const height = svg.clientHeight || 300;
  svg.setAttribute("viewBox", `0 0 ${width} ${height}`);

  const bounds = lonLatBounds(allCoords(doc.features));
  if (!bounds) {
    const note = el("text", {
      x: String(width / 2),
      y: String(height / 2),
      class: "map-empty",
      "text-anchor": "middle",
    });
    note.textContent = "no routes";
    svg.append(note);
    return;
  }
  const proj = makeProjection(bounds, width, height, 24);

  for (const f of doc.features) {
    if (f.geometry.type !== "LineString") continue;
    const pts = f.geometry.coordinates
      .map(([lon, lat]) => proj.toXY(lon, lat).map((v) => v.toFixed(1)).join(","))
      .join(" ");
    const line = el("polyline", { points: pts, class: "map-route" });
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = String(f.properties.route_id ?? "route");
    line.append(title);
    svg.append(line);
  }

  for (const f of doc.features) {
    if (f.geometry.type !== "Point") continue;
    const [lon, lat] = f.geometry.coordinates;
    const [x, y] = proj.toXY(lon, lat);
    const severity = String(f.properties.severity ?? "info");
    const pin = el("circle", {
      cx: x.toFixed(1),
      cy: y.toFixed(1),
      r: "7",
      class: `map-pin sev-${severity}`,
      fill: PIN_COLORS[severity] ?? PIN_COLORS.info,
    });
    const title = document.createElementNS(SVG_NS, "title");
    title.textContent = `${f.properties.kind ?? "alert"} (${severity})`;
    pin.append(title);
    const alertId = f.properties.alert_id;
    if (onPinClick && typeof alertId === "string") {
      pin.addEventListener("click", () => onPinClick(alertId));
    }
    svg.append(pin);
  }
}
