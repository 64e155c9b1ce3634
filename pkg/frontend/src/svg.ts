/**
 * Deterministic SVG line charts: fixed canvas, fixed fonts, no wall-clock
 * or random state anywhere, so identical inputs give identical bytes.
 */

export interface Series {
  label: string;
  x: number[];
  y: number[];
  color: string;
  dash?: string;
  markers?: boolean;
}

export interface Panel {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
}

export const PANEL_WIDTH = 800;
export const PANEL_HEIGHT = 240;
const MARGIN = { left: 64, right: 16, top: 28, bottom: 36 };

const COLORS = [
  "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
  "#17becf", "#e377c2",
];

export function color(i: number): string {
  return COLORS[i % COLORS.length];
}

function fmt(v: number): string {
  if (!Number.isFinite(v)) return "nan";
  if (v === 0) return "0";
  const a = Math.abs(v);
  if (a >= 1e4 || a < 1e-3) return v.toExponential(1);
  return String(Math.round(v * 1e6) / 1e6);
}

function esc(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function niceTicks(lo: number, hi: number, count: number): number[] {
  if (!(hi > lo)) {
    return [lo];
  }
  const span = hi - lo;
  const step0 = span / Math.max(count - 1, 1);
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  const candidates = [1, 2, 2.5, 5, 10].map((m) => m * mag);
  const step = candidates.find((s) => span / s <= count) ?? candidates[4];
  const first = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = first; v <= hi + 1e-12 * span; v += step) {
    ticks.push(Math.abs(v) < 1e-12 * span ? 0 : v);
  }
  return ticks;
}

function extent(values: number[]): [number, number] {
  let lo = Infinity;
  let hi = -Infinity;
  for (const v of values) {
    if (Number.isFinite(v)) {
      if (v < lo) lo = v;
      if (v > hi) hi = v;
    }
  }
  if (lo === Infinity) {
    return [0, 1];
  }
  if (lo === hi) {
    return [lo - 0.5, hi + 0.5];
  }
  const pad = 0.05 * (hi - lo);
  return [lo - pad, hi + pad];
}

function renderPanel(panel: Panel, yOffset: number): string {
  const w = PANEL_WIDTH - MARGIN.left - MARGIN.right;
  const h = PANEL_HEIGHT - MARGIN.top - MARGIN.bottom;
  const allX = panel.series.flatMap((s) => s.x);
  const allY = panel.series.flatMap((s) => s.y);
  const [x0, x1] = extent(allX);
  const [y0, y1] = extent(allY);
  const px = (v: number) => MARGIN.left + ((v - x0) / (x1 - x0)) * w;
  const py = (v: number) =>
    yOffset + MARGIN.top + h - ((v - y0) / (y1 - y0)) * h;

  const parts: string[] = [];
  parts.push(
    `<text x="${MARGIN.left}" y="${yOffset + 16}" class="title">` +
      `${esc(panel.title)}</text>`,
  );
  // axes frame
  parts.push(
    `<rect x="${MARGIN.left}" y="${yOffset + MARGIN.top}" width="${w}" ` +
      `height="${h}" class="frame"/>`,
  );
  for (const t of niceTicks(x0, x1, 8)) {
    const x = px(t);
    parts.push(
      `<line x1="${x.toFixed(2)}" y1="${(yOffset + MARGIN.top + h).toFixed(2)}" ` +
        `x2="${x.toFixed(2)}" y2="${(yOffset + MARGIN.top + h + 4).toFixed(2)}" class="tick"/>`,
      `<text x="${x.toFixed(2)}" y="${(yOffset + MARGIN.top + h + 16).toFixed(2)}" ` +
        `class="ticklabel" text-anchor="middle">${fmt(t)}</text>`,
    );
  }
  for (const t of niceTicks(y0, y1, 6)) {
    const y = py(t);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${y.toFixed(2)}" ` +
        `x2="${PANEL_WIDTH - MARGIN.right}" y2="${y.toFixed(2)}" class="grid"/>`,
      `<text x="${MARGIN.left - 6}" y="${(y + 3).toFixed(2)}" ` +
        `class="ticklabel" text-anchor="end">${fmt(t)}</text>`,
    );
  }
  parts.push(
    `<text x="${MARGIN.left + w / 2}" y="${yOffset + PANEL_HEIGHT - 6}" ` +
      `class="axis" text-anchor="middle">${esc(panel.xLabel)}</text>`,
    `<text x="14" y="${yOffset + MARGIN.top + h / 2}" class="axis" ` +
      `text-anchor="middle" transform="rotate(-90 14 ${yOffset + MARGIN.top + h / 2})">` +
      `${esc(panel.yLabel)}</text>`,
  );
  panel.series.forEach((s, i) => {
    const pts = s.x
      .map((xv, k) => [px(xv), py(s.y[k])])
      .filter(([a, b]) => Number.isFinite(a) && Number.isFinite(b));
    const d = pts.map(([a, b]) => `${a.toFixed(2)},${b.toFixed(2)}`).join(" ");
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    parts.push(
      `<polyline points="${d}" fill="none" stroke="${s.color}"` +
        `${dash} stroke-width="1.4"/>`,
    );
    if (s.markers) {
      for (const [a, b] of pts) {
        parts.push(
          `<circle cx="${a.toFixed(2)}" cy="${b.toFixed(2)}" r="2.5" ` +
            `fill="${s.color}"/>`,
        );
      }
    }
    // legend swatch, right-aligned rows
    const lx = PANEL_WIDTH - MARGIN.right - 150;
    const ly = yOffset + MARGIN.top + 12 + i * 14;
    parts.push(
      `<line x1="${lx}" y1="${ly - 4}" x2="${lx + 18}" y2="${ly - 4}" ` +
        `stroke="${s.color}"${dash} stroke-width="1.4"/>`,
      `<text x="${lx + 24}" y="${ly}" class="legend">${esc(s.label)}</text>`,
    );
  });
  return parts.join("\n");
}

export function renderFigure(panels: Panel[]): string {
  const height = panels.length * PANEL_HEIGHT;
  const body = panels
    .map((p, i) => renderPanel(p, i * PANEL_HEIGHT))
    .join("\n");
  return `<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" width="${PANEL_WIDTH}" height="${height}" viewBox="0 0 ${PANEL_WIDTH} ${height}">
<style>
text { font-family: monospace; fill: #222; }
.title { font-size: 13px; font-weight: bold; }
.axis { font-size: 11px; }
.ticklabel { font-size: 10px; fill: #444; }
.legend { font-size: 10px; }
.frame { fill: none; stroke: #999; stroke-width: 1; }
.grid { stroke: #e0e0e0; stroke-width: 0.5; }
.tick { stroke: #999; stroke-width: 1; }
</style>
<rect width="100%" height="100%" fill="white"/>
${body}
</svg>
`;
}
