/**
 * Minimal self-contained SVG line charts with logarithmic energy axes.
 *
 * No DOM or canvas involved: figures are assembled as SVG text, one panel
 * per case, which keeps the output identical across machines.
 */

export interface Series {
  label: string;
  color: string;
  t: number[];
  y: number[];
}

export interface Panel {
  title: string;
  series: Series[];
}

const WIDTH = 460;
const HEIGHT = 360;
const MARGIN = { left: 64, right: 14, top: 30, bottom: 42 };
/** values at or below zero are clipped to this floor before taking logs */
export const LOG_FLOOR = 1e-30;

function niceLogTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  const first = Math.ceil(lo);
  const step = Math.max(1, Math.round((hi - lo) / 6));
  for (let e = first; e <= hi; e += step) {
    ticks.push(e);
  }
  return ticks;
}

function escapeText(s: string): string {
  return s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
}

function renderPanel(panel: Panel, xOffset: number): string {
  const innerW = WIDTH - MARGIN.left - MARGIN.right;
  const innerH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const allT = panel.series.flatMap((s) => s.t);
  const tMin = Math.min(...allT);
  const tMax = Math.max(...allT);
  const logs = panel.series.flatMap((s) => s.y.map((v) => Math.log10(Math.max(v, LOG_FLOOR))));
  let yMin = Math.min(...logs);
  let yMax = Math.max(...logs);
  if (!(yMax > yMin)) {
    yMin -= 1;
    yMax += 1;
  }
  const sx = (t: number) => MARGIN.left + ((t - tMin) / Math.max(tMax - tMin, 1e-300)) * innerW;
  const sy = (v: number) => {
    const l = Math.log10(Math.max(v, LOG_FLOOR));
    return MARGIN.top + (1 - (l - yMin) / (yMax - yMin)) * innerH;
  };

  const parts: string[] = [];
  parts.push(`<g transform="translate(${xOffset},0)">`);
  parts.push(`<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${innerW}" height="${innerH}" fill="none" stroke="#444"/>`);
  parts.push(`<text x="${MARGIN.left + innerW / 2}" y="${MARGIN.top - 12}" text-anchor="middle" font-size="14">${escapeText(panel.title)}</text>`);

  for (const e of niceLogTicks(yMin, yMax)) {
    const y = MARGIN.top + (1 - (e - yMin) / (yMax - yMin)) * innerH;
    parts.push(`<line x1="${MARGIN.left - 4}" y1="${y.toFixed(2)}" x2="${MARGIN.left}" y2="${y.toFixed(2)}" stroke="#444"/>`);
    parts.push(`<text x="${MARGIN.left - 8}" y="${(y + 4).toFixed(2)}" text-anchor="end" font-size="10">1e${e}</text>`);
  }
  const nx = 5;
  for (let i = 0; i <= nx; i++) {
    const t = tMin + ((tMax - tMin) * i) / nx;
    const x = sx(t);
    const yb = MARGIN.top + innerH;
    parts.push(`<line x1="${x.toFixed(2)}" y1="${yb}" x2="${x.toFixed(2)}" y2="${yb + 4}" stroke="#444"/>`);
    parts.push(`<text x="${x.toFixed(2)}" y="${yb + 16}" text-anchor="middle" font-size="10">${t.toPrecision(3)}</text>`);
  }
  parts.push(`<text x="${MARGIN.left + innerW / 2}" y="${HEIGHT - 8}" text-anchor="middle" font-size="12">t</text>`);

  panel.series.forEach((s, idx) => {
    const pts = s.t.map((t, i) => `${sx(t).toFixed(2)},${sy(s.y[i]).toFixed(2)}`).join(" ");
    parts.push(`<polyline points="${pts}" fill="none" stroke="${s.color}" stroke-width="1.5"/>`);
    const ly = MARGIN.top + 14 + 14 * idx;
    const lx = MARGIN.left + 10;
    parts.push(`<line x1="${lx}" y1="${ly - 4}" x2="${lx + 18}" y2="${ly - 4}" stroke="${s.color}" stroke-width="1.5"/>`);
    parts.push(`<text x="${lx + 24}" y="${ly}" font-size="11">${escapeText(s.label)}</text>`);
  });
  parts.push("</g>");
  return parts.join("\n");
}

export function renderFigure(panels: Panel[]): string {
  const width = WIDTH * panels.length;
  const body = panels.map((panel, i) => renderPanel(panel, i * WIDTH)).join("\n");
  return [
    `<svg xmlns="http://www.w3.org/2000/svg" width="${width}" height="${HEIGHT}" viewBox="0 0 ${width} ${HEIGHT}">`,
    `<rect width="${width}" height="${HEIGHT}" fill="white"/>`,
    body,
    "</svg>",
    "",
  ].join("\n");
}
