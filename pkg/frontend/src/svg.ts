/** Deterministic SVG line charts with no DOM or plotting dependency. */
import { FigureData } from "./figure.js";

const WIDTH = 720;
const HEIGHT = 480;
const MARGIN = { top: 48, right: 24, bottom: 56, left: 72 };
const PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const MARKERS = ["circle", "square", "diamond", "triangle", "cross", "circle"];

function niceTicks(lo: number, hi: number, count = 6): number[] {
  if (!(hi > lo)) {
    const pad = Math.abs(lo) > 0 ? Math.abs(lo) * 0.1 : 1;
    lo -= pad;
    hi += pad;
  }
  const span = hi - lo;
  const step0 = span / Math.max(count - 1, 1);
  const mag = Math.pow(10, Math.floor(Math.log10(step0)));
  const step = [1, 2, 2.5, 5, 10].map((m) => m * mag).find((s) => span / s <= count) ?? mag * 10;
  const start = Math.ceil(lo / step) * step;
  const ticks: number[] = [];
  for (let v = start; v <= hi + step * 1e-9; v += step) {
    ticks.push(Number(v.toPrecision(10)));
  }
  return ticks;
}

function fmt(x: number): string {
  if (x === 0) return "0";
  const ax = Math.abs(x);
  if (ax >= 1e4 || ax < 1e-3) return x.toExponential(1);
  return Number(x.toPrecision(6)).toString();
}

function marker(kind: string, x: number, y: number, color: string): string {
  const r = 3.5;
  switch (kind) {
    case "square":
      return `<rect x="${x - r}" y="${y - r}" width="${2 * r}" height="${2 * r}" fill="${color}"/>`;
    case "diamond":
      return `<path d="M${x} ${y - r}L${x + r} ${y}L${x} ${y + r}L${x - r} ${y}Z" fill="${color}"/>`;
    case "triangle":
      return `<path d="M${x} ${y - r}L${x + r} ${y + r}L${x - r} ${y + r}Z" fill="${color}"/>`;
    case "cross":
      return `<path d="M${x - r} ${y - r}L${x + r} ${y + r}M${x - r} ${y + r}L${x + r} ${y - r}" stroke="${color}" stroke-width="1.5"/>`;
    default:
      return `<circle cx="${x}" cy="${y}" r="${r}" fill="${color}"/>`;
  }
}

export function renderSvg(figure: FigureData, title: string): string {
  const xs = figure.series.flatMap((s) => s.x);
  const ys = figure.series.flatMap((s) => s.y);
  const xTicks = niceTicks(Math.min(...xs), Math.max(...xs));
  const yTicks = niceTicks(Math.min(...ys), Math.max(...ys));
  const xLo = Math.min(xTicks[0], Math.min(...xs));
  const xHi = Math.max(xTicks[xTicks.length - 1], Math.max(...xs));
  const yLo = Math.min(yTicks[0], Math.min(...ys));
  const yHi = Math.max(yTicks[yTicks.length - 1], Math.max(...ys));
  const plotW = WIDTH - MARGIN.left - MARGIN.right;
  const plotH = HEIGHT - MARGIN.top - MARGIN.bottom;
  const px = (x: number) => MARGIN.left + ((x - xLo) / (xHi - xLo || 1)) * plotW;
  const py = (y: number) => MARGIN.top + plotH - ((y - yLo) / (yHi - yLo || 1)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${WIDTH}" height="${HEIGHT}" viewBox="0 0 ${WIDTH} ${HEIGHT}" font-family="Helvetica, Arial, sans-serif">`,
  );
  parts.push(`<rect width="${WIDTH}" height="${HEIGHT}" fill="white"/>`);
  parts.push(
    `<text x="${WIDTH / 2}" y="24" text-anchor="middle" font-size="16">${escapeXml(title)}</text>`,
  );

  for (const t of xTicks) {
    const x = px(t);
    parts.push(
      `<line x1="${x}" y1="${MARGIN.top}" x2="${x}" y2="${MARGIN.top + plotH}" stroke="#dddddd"/>`,
      `<text x="${x}" y="${MARGIN.top + plotH + 20}" text-anchor="middle" font-size="12">${fmt(t)}</text>`,
    );
  }
  for (const t of yTicks) {
    const y = py(t);
    parts.push(
      `<line x1="${MARGIN.left}" y1="${y}" x2="${MARGIN.left + plotW}" y2="${y}" stroke="#dddddd"/>`,
      `<text x="${MARGIN.left - 8}" y="${y + 4}" text-anchor="end" font-size="12">${fmt(t)}</text>`,
    );
  }
  parts.push(
    `<rect x="${MARGIN.left}" y="${MARGIN.top}" width="${plotW}" height="${plotH}" fill="none" stroke="#333333"/>`,
    `<text x="${MARGIN.left + plotW / 2}" y="${HEIGHT - 12}" text-anchor="middle" font-size="13">${escapeXml(figure.xLabel)}</text>`,
    `<text x="20" y="${MARGIN.top + plotH / 2}" text-anchor="middle" font-size="13" transform="rotate(-90 20 ${MARGIN.top + plotH / 2})">${escapeXml(figure.yLabel)}</text>`,
  );

  figure.series.forEach((series, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    const shape = MARKERS[idx % MARKERS.length];
    const points = series.x.map((x, i) => `${px(x)},${py(series.y[i])}`).join(" ");
    parts.push(
      `<polyline points="${points}" fill="none" stroke="${color}" stroke-width="1.8"/>`,
    );
    series.x.forEach((x, i) => parts.push(marker(shape, px(x), py(series.y[i]), color)));
  });

  const legendX = MARGIN.left + 12;
  figure.series.forEach((series, idx) => {
    const color = PALETTE[idx % PALETTE.length];
    const y = MARGIN.top + 16 + idx * 18;
    parts.push(
      `<line x1="${legendX}" y1="${y - 4}" x2="${legendX + 26}" y2="${y - 4}" stroke="${color}" stroke-width="1.8"/>`,
      marker(MARKERS[idx % MARKERS.length], legendX + 13, y - 4, color),
      `<text x="${legendX + 32}" y="${y}" font-size="12">${escapeXml(series.label)}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

function escapeXml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}
