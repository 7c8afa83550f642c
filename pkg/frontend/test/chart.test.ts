// The chart must display exactly what /api/glidepath returned; fixtures are
// captured verbatim from the real service.

import { describe, expect, it } from 'vitest';

import { chartModel, renderChartSvg } from '../src/chart';
import type { GlidepathResponse } from '../src/types';

import glideG8 from './fixtures/glidepath_g8.json';
import glideG12 from './fixtures/glidepath_g1_2.json';

const g8 = glideG8 as GlidepathResponse;
const g12 = glideG12 as GlidepathResponse;

describe('chart model', () => {
  it('threshold markers equal the response values exactly', () => {
    const model = chartModel(g8);
    const alphas = model.markers.map((m) => m.alpha);
    expect(alphas).toContain(g8.thresholds.full_stock_alpha);
    expect(alphas).toContain(g8.thresholds.budget_binding_alpha);
    expect(model.markers.map((m) => m.label)).toEqual([
      'full stock 15.8%',
      'budget binds 73.2%',
    ]);
  });

  it('series points are the response weights verbatim', () => {
    const model = chartModel(g8);
    const bond = model.series[0];
    const stock = model.series[1];
    g8.points.forEach((p, i) => {
      expect(bond.points[i].alpha).toBe(p.alpha);
      expect(bond.points[i].weight).toBe(p.weights[0]);
      expect(stock.points[i].weight).toBe(p.weights[1]);
    });
  });

  it('gamma below the full-stock bound collapses to a single region', () => {
    // thresholds both cap at 1, so no interior markers and an all-stock path
    const model = chartModel(g12);
    expect(model.markers).toEqual([]);
    expect(model.series[1].points.every((p) => p.weight === 1)).toBe(true);
    expect(model.series[0].points.every((p) => p.weight === 0)).toBe(true);
  });
});

describe('svg rendering', () => {
  it('embeds one marker group per threshold with the exact alpha', () => {
    const svg = renderChartSvg(chartModel(g8));
    expect(svg).toContain(`data-alpha="${g8.thresholds.full_stock_alpha}"`);
    expect(svg).toContain(`data-alpha="${g8.thresholds.budget_binding_alpha}"`);
    expect(svg).toContain('data-series="bonds"');
    expect(svg).toContain('data-series="stocks"');
  });
});
