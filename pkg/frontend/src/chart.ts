// Canvas OTDR trace chart: distance on x, level (dB) on y, detected events
// as labelled markers. Redrawn whole on every update; traces are a few
// thousand points, well within a single rAF budget.

import { fmtDistance } from "./format.js";
import { niceTicks } from "./geometry.js";
import type { DetectedEventDoc, TraceDoc } from "./types.js";

const MARGIN = { top: 14, right: 16, bottom: 30, left: 46 };

const EVENT_COLORS: Record<string, string> = {
  reflective: "#e8b33d",
  loss: "#e0604d",
  fiber_end: "#8fa3b8",
};

export function drawTrace(
  canvas: HTMLCanvasElement,
  trace: TraceDoc | null,
  events: DetectedEventDoc[],
): void {
  const dpr = window.devicePixelRatio || 1;
  const cssW = canvas.clientWidth || 600;
  const cssH = canvas.clientHeight || 240;
  if (canvas.width !== cssW * dpr || canvas.height !== cssH * dpr) {
    canvas.width = cssW * dpr;
    canvas.height = cssH * dpr;
  }
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.setTransform(dpr, 0, 0, dpr, 0, 0);
  ctx.clearRect(0, 0, cssW, cssH);
  const styles = getComputedStyle(canvas);
  const axisColor = styles.getPropertyValue("--chart-axis").trim() || "#5b6b7c";
  const gridColor = styles.getPropertyValue("--chart-grid").trim() || "rgba(91,107,124,.25)";
  const lineColor = styles.getPropertyValue("--chart-line").trim() || "#53b1fd";
  const textColor = styles.getPropertyValue("--chart-text").trim() || "#9fb0c0";

  if (!trace || trace.samples.length === 0) {
    ctx.fillStyle = textColor;
    ctx.font = "13px system-ui, sans-serif";
    ctx.textAlign = "center";
    ctx.fillText("no trace yet", cssW / 2, cssH / 2);
    return;
  }

  const spacing = trace.params.sample_spacing_m;
  const xMax = (trace.samples.length - 1) * spacing;
  let yMin = Infinity, yMax = -Infinity;
  for (const v of trace.samples) {
    if (v < yMin) yMin = v;
    if (v > yMax) yMax = v;
  }
  const pad = Math.max(1, (yMax - yMin) * 0.06);
  yMin -= pad;
  yMax += pad;

  const plotW = cssW - MARGIN.left - MARGIN.right;
  const plotH = cssH - MARGIN.top - MARGIN.bottom;
  const px = (m: number) => MARGIN.left + (m / xMax) * plotW;
  const py = (db: number) => MARGIN.top + ((yMax - db) / (yMax - yMin)) * plotH;

  ctx.font = "11px system-ui, sans-serif";
  ctx.strokeStyle = gridColor;
  ctx.fillStyle = textColor;
  ctx.lineWidth = 1;
  for (const t of niceTicks(0, xMax, 6)) {
    const x = px(t);
    ctx.beginPath();
    ctx.moveTo(x, MARGIN.top);
    ctx.lineTo(x, MARGIN.top + plotH);
    ctx.stroke();
    ctx.textAlign = "center";
    ctx.fillText(fmtDistance(t), x, cssH - 10);
  }
  for (const t of niceTicks(yMin, yMax, 5)) {
    const y = py(t);
    ctx.beginPath();
    ctx.moveTo(MARGIN.left, y);
    ctx.lineTo(MARGIN.left + plotW, y);
    ctx.stroke();
    ctx.textAlign = "right";
    ctx.fillText(t.toFixed(0), MARGIN.left - 6, y + 3);
  }
  ctx.strokeStyle = axisColor;
  ctx.strokeRect(MARGIN.left, MARGIN.top, plotW, plotH);

  // event markers behind the trace line
  for (const ev of events) {
    const x = px(ev.position_m);
    ctx.strokeStyle = EVENT_COLORS[ev.kind] ?? "#c58af9";
    ctx.setLineDash([4, 3]);
    ctx.beginPath();
    ctx.moveTo(x, MARGIN.top);
    ctx.lineTo(x, MARGIN.top + plotH);
    ctx.stroke();
    ctx.setLineDash([]);
    ctx.fillStyle = EVENT_COLORS[ev.kind] ?? "#c58af9";
    ctx.textAlign = "left";
    ctx.fillText(`${ev.kind} ${ev.loss_db.toFixed(2)} dB`, x + 4, MARGIN.top + 10);
  }

  ctx.strokeStyle = lineColor;
  ctx.lineWidth = 1.4;
  ctx.beginPath();
  trace.samples.forEach((v, i) => {
    const x = px(i * spacing);
    const y = py(v);
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  });
  ctx.stroke();
}
