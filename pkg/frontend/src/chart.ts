// Glide-path chart: bond/stock weight against the capital ratio, with the
// two structural thresholds as vertical markers. The chart model is built
// verbatim from a /api/glidepath response; nothing is recomputed here, so a
// rendered number can always be traced back to a response field.

import { percent1 } from './format';
import type { GlidepathResponse } from './types';

export interface ChartSeries {
  label: string;
  color: string;
  points: { alpha: number; weight: number }[];
}

export interface ChartMarker {
  label: string;
  alpha: number;
}

export interface ChartModel {
  series: ChartSeries[];
  markers: ChartMarker[];
}

export function chartModel(response: GlidepathResponse): ChartModel {
  const pick = (index: number) =>
    response.points
      .filter((p) => p.alpha !== null)
      .map((p) => ({ alpha: p.alpha as number, weight: p.weights[index] }));
  const markers: ChartMarker[] = [];
  const { budget_binding_alpha, full_stock_alpha } = response.thresholds;
  if (full_stock_alpha > 0 && full_stock_alpha < 1) {
    markers.push({ label: `full stock ${percent1(full_stock_alpha)}`, alpha: full_stock_alpha });
  }
  if (budget_binding_alpha > 0 && budget_binding_alpha < 1) {
    markers.push({
      label: `budget binds ${percent1(budget_binding_alpha)}`,
      alpha: budget_binding_alpha,
    });
  }
  return {
    series: [
      { label: 'bonds', color: '#4a78c2', points: pick(0) },
      { label: 'stocks', color: '#c2574a', points: pick(1) },
    ],
    markers,
  };
}

const W = 720;
const H = 360;
const PAD = { left: 48, right: 16, top: 16, bottom: 36 };

const x = (alpha: number) => PAD.left + alpha * (W - PAD.left - PAD.right);
const y = (weight: number) => H - PAD.bottom - weight * (H - PAD.top - PAD.bottom);

export function renderChartSvg(model: ChartModel): string {
  const gridLines = [0, 0.25, 0.5, 0.75, 1].map(
    (w) =>
      `<line x1="${PAD.left}" y1="${y(w)}" x2="${W - PAD.right}" y2="${y(w)}" ` +
      `class="grid"/><text x="8" y="${y(w) + 4}" class="axis">${Math.round(w * 100)}%</text>`,
  );
  const paths = model.series.map((s) => {
    const d = s.points
      .map((p, i) => `${i === 0 ? 'M' : 'L'}${x(p.alpha).toFixed(1)},${y(p.weight).toFixed(1)}`)
      .join(' ');
    return `<path d="${d}" fill="none" stroke="${s.color}" stroke-width="2" data-series="${s.label}"/>`;
  });
  const markers = model.markers.map(
    (m) =>
      `<g class="marker" data-alpha="${m.alpha}">` +
      `<line x1="${x(m.alpha).toFixed(1)}" y1="${PAD.top}" x2="${x(m.alpha).toFixed(1)}" ` +
      `y2="${H - PAD.bottom}" stroke="#888" stroke-dasharray="4 3"/>` +
      `<text x="${(x(m.alpha) + 4).toFixed(1)}" y="${PAD.top + 12}" class="axis">${m.label}</text></g>`,
  );
  const legend = model.series.map(
    (s, i) =>
      `<text x="${PAD.left + 8 + i * 90}" y="${H - 8}" fill="${s.color}">${s.label}</text>`,
  );
  return (
    `<svg viewBox="0 0 ${W} ${H}" xmlns="http://www.w3.org/2000/svg" role="img">` +
    `<text x="${W / 2}" y="${H - 8}" class="axis">capital ratio</text>` +
    gridLines.join('') +
    paths.join('') +
    markers.join('') +
    legend.join('') +
    '</svg>'
  );
}
