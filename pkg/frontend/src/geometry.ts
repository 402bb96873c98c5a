// Map projection and axis math shared by the SVG map and the canvas chart.

export interface Bounds {
  minLon: number;
  maxLon: number;
  minLat: number;
  maxLat: number;
}

export function lonLatBounds(coords: [number, number][]): Bounds | null {
  if (coords.length === 0) return null;
  let minLon = Infinity, maxLon = -Infinity, minLat = Infinity, maxLat = -Infinity;
  for (const [lon, lat] of coords) {
    if (lon < minLon) minLon = lon;
    if (lon > maxLon) maxLon = lon;
    if (lat < minLat) minLat = lat;
    if (lat > maxLat) maxLat = lat;
  }
  return { minLon, maxLon, minLat, maxLat };
}

export interface Projection {
  toXY(lon: number, lat: number): [number, number];
  scale: number; // screen px per degree of latitude
}

/** Fit a lon/lat box into width x height with padding: equirectangular with
 * the usual cos(mid-latitude) squeeze on longitude, aspect preserved, y
 * flipped so north points up. A degenerate box centres on the point. */
export function makeProjection(
  bounds: Bounds,
  width: number,
  height: number,
  padding = 20,
): Projection {
  const midLat = (bounds.minLat + bounds.maxLat) / 2;
  const kx = Math.cos((midLat * Math.PI) / 180);
  const spanX = (bounds.maxLon - bounds.minLon) * kx;
  const spanY = bounds.maxLat - bounds.minLat;
  const innerW = Math.max(1, width - 2 * padding);
  const innerH = Math.max(1, height - 2 * padding);
  const scale =
    spanX <= 0 && spanY <= 0
      ? 1
      : Math.min(spanX > 0 ? innerW / spanX : Infinity, spanY > 0 ? innerH / spanY : Infinity);
  const cx = (bounds.minLon + bounds.maxLon) / 2;
  const cy = midLat;
  return {
    scale,
    toXY(lon: number, lat: number): [number, number] {
      const x = width / 2 + (lon - cx) * kx * scale;
      const y = height / 2 - (lat - cy) * scale;
      return [x, y];
    },
  };
}

/** Round tick positions covering [min, max]: steps of 1/2/5 x 10^k. */
export function niceTicks(min: number, max: number, target = 5): number[] {
  if (!Number.isFinite(min) || !Number.isFinite(max) || target < 2) return [];
  if (min === max) return [min];
  if (min > max) [min, max] = [max, min];
  const raw = (max - min) / (target - 1);
  const mag = Math.pow(10, Math.floor(Math.log10(raw)));
  let step = mag;
  for (const m of [1, 2, 5, 10]) {
    step = m * mag;
    if (step >= raw) break;
  }
  // index arithmetic + re-rounding keeps ticks clean (no 0.6000000000000001)
  const first = Math.ceil(min / step - 1e-9);
  const last = Math.floor(max / step + 1e-9);
  const ticks: number[] = [];
  for (let i = first; i <= last; i++) {
    ticks.push(i === 0 ? 0 : Number((i * step).toPrecision(12)));
  }
  return ticks;
}
