import { PlotError } from "./errors.js";
import type { PlotSpec } from "./spec.js";
import * as style from "./style.js";

export interface Curve {
  label: string;
  column: string;
  x: number[];
  y: number[];
}

const fmt = (v: number) => {
  const s = v.toFixed(2);
  return s === "-0.00" ? "0.00" : s;
};

function niceTicks(lo: number, hi: number, count: number): number[] {
  if (!(hi > lo)) {
    hi = lo + 1;
  }
  const span = hi - lo;
  const step = Math.pow(10, Math.floor(Math.log10(span / count)));
  const err = span / (count * step);
  const mult = err >= 7.5 ? 10 : err >= 3.5 ? 5 : err >= 1.5 ? 2 : 1;
  const tick = step * mult;
  const start = Math.ceil(lo / tick) * tick;
  const ticks: number[] = [];
  for (let v = start; v <= hi + 1e-12 * span; v += tick) {
    ticks.push(v);
  }
  return ticks;
}

function logTicks(lo: number, hi: number): number[] {
  const ticks: number[] = [];
  for (let e = Math.floor(Math.log10(lo)); e <= Math.ceil(Math.log10(hi)); e++) {
    const v = Math.pow(10, e);
    if (v >= lo / 1.0001 && v <= hi * 1.0001) ticks.push(v);
  }
  return ticks.length >= 2 ? ticks : [lo, hi];
}

const escapeXml = (s: string) =>
  s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");

/** Render curves to a self-contained SVG document string. */
export function renderSvg(curves: Curve[], spec: PlotSpec): string {
  if (curves.length === 0) {
    throw new PlotError("nothing to draw: no curves selected");
  }
  const { WIDTH: W, HEIGHT: H, MARGIN: M } = style;
  const plotW = W - M.left - M.right;
  const plotH = H - M.top - M.bottom;

  const xs = curves.flatMap((c) => c.x);
  let ys = curves.flatMap((c) => c.y);
  const xLo = Math.min(...xs);
  const xHi = Math.max(...xs);
  if (spec.logY) {
    ys = ys.filter((v) => v > 0);
    if (ys.length === 0) {
      throw new PlotError("log-scale axis requested but no positive values");
    }
  }
  let yLo = Math.min(...ys);
  let yHi = Math.max(...ys);
  if (yLo === yHi) {
    yLo -= 0.5;
    yHi += 0.5;
  }
  if (!spec.logY) {
    const pad = 0.05 * (yHi - yLo);
    yLo -= pad;
    yHi += pad;
  }

  const xPix = (v: number) =>
    M.left + ((v - xLo) / (xHi - xLo || 1)) * plotW;
  const yPix = spec.logY
    ? (v: number) =>
        M.top +
        plotH -
        ((Math.log10(v) - Math.log10(yLo)) /
          (Math.log10(yHi) - Math.log10(yLo) || 1)) *
          plotH
    : (v: number) => M.top + plotH - ((v - yLo) / (yHi - yLo || 1)) * plotH;

  const parts: string[] = [];
  parts.push(
    `<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" ` +
      `viewBox="0 0 ${W} ${H}">`,
  );
  parts.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  if (spec.title) {
    parts.push(
      `<text x="${W / 2}" y="${M.top - 18}" text-anchor="middle" ` +
        `font-family="${style.FONT_FAMILY}" font-size="${style.FONT_SIZE_TITLE}" ` +
        `fill="${style.AXIS_COLOR}">${escapeXml(spec.title)}</text>`,
    );
  }

  // gridlines and ticks
  const xTicks = niceTicks(xLo, xHi, style.X_TICKS);
  const yTicks = spec.logY
    ? logTicks(yLo, yHi)
    : niceTicks(yLo, yHi, style.Y_TICKS);
  for (const t of xTicks) {
    const px = xPix(t);
    parts.push(
      `<line x1="${fmt(px)}" y1="${M.top}" x2="${fmt(px)}" ` +
        `y2="${M.top + plotH}" stroke="${style.GRID_COLOR}" stroke-width="1"/>`,
    );
    parts.push(
      `<text x="${fmt(px)}" y="${M.top + plotH + 18}" text-anchor="middle" ` +
        `font-family="${style.FONT_FAMILY}" font-size="${style.FONT_SIZE_AXIS}" ` +
        `fill="${style.AXIS_COLOR}">${+t.toPrecision(6)}</text>`,
    );
  }
  for (const t of yTicks) {
    const py = yPix(t);
    parts.push(
      `<line x1="${M.left}" y1="${fmt(py)}" x2="${M.left + plotW}" ` +
        `y2="${fmt(py)}" stroke="${style.GRID_COLOR}" stroke-width="1"/>`,
    );
    parts.push(
      `<text x="${M.left - 8}" y="${fmt(py + 4)}" text-anchor="end" ` +
        `font-family="${style.FONT_FAMILY}" font-size="${style.FONT_SIZE_AXIS}" ` +
        `fill="${style.AXIS_COLOR}">${+t.toPrecision(6)}</text>`,
    );
  }
  // axes
  parts.push(
    `<rect x="${M.left}" y="${M.top}" width="${plotW}" height="${plotH}" ` +
      `fill="none" stroke="${style.AXIS_COLOR}" stroke-width="1"/>`,
  );
  parts.push(
    `<text x="${M.left + plotW / 2}" y="${H - 14}" text-anchor="middle" ` +
      `font-family="${style.FONT_FAMILY}" font-size="${style.FONT_SIZE_AXIS}" ` +
      `fill="${style.AXIS_COLOR}">${escapeXml(spec.xColumn)}</text>`,
  );

  // curves
  curves.forEach((curve, i) => {
    const color = style.PALETTE[i % style.PALETTE.length];
    const dash = curve.column.endsWith(style.BOUND_SUFFIX)
      ? ` stroke-dasharray="${style.BOUND_DASH}"`
      : "";
    const pts = curve.x
      .map((xv, j) => ({ xv, yv: curve.y[j] }))
      .filter(({ yv }) => !spec.logY || yv > 0)
      .map(({ xv, yv }) => `${fmt(xPix(xv))},${fmt(yPix(yv))}`)
      .join(" ");
    parts.push(
      `<polyline points="${pts}" fill="none" stroke="${color}" ` +
        `stroke-width="${style.STROKE_WIDTH}"${dash} class="curve"/>`,
    );
  });

  // legend
  curves.forEach((curve, i) => {
    const color = style.PALETTE[i % style.PALETTE.length];
    const lx = M.left + 12;
    const ly = M.top + 14 + i * 18;
    const dash = curve.column.endsWith(style.BOUND_SUFFIX)
      ? ` stroke-dasharray="${style.BOUND_DASH}"`
      : "";
    parts.push(
      `<line x1="${lx}" y1="${ly - 4}" x2="${lx + 26}" y2="${ly - 4}" ` +
        `stroke="${color}" stroke-width="${style.STROKE_WIDTH}"${dash} ` +
        `class="legend-line"/>`,
    );
    parts.push(
      `<text x="${lx + 32}" y="${ly}" font-family="${style.FONT_FAMILY}" ` +
        `font-size="${style.FONT_SIZE_LEGEND}" fill="${style.AXIS_COLOR}" ` +
        `class="legend-label">${escapeXml(curve.label)}</text>`,
    );
  });

  parts.push("</svg>");
  return parts.join("\n") + "\n";
}
